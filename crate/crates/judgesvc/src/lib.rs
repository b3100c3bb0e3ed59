//! Backend for pairwise human-preference studies over selected views.
//!
//! Judges are shown two views of the same clip side by side and pick the
//! more informative one, or both. Each judge sees the pairs in their own
//! order with their own left/right assignment, both derived from the session
//! seed. Judgments go to an append-only JSON-lines log, which is the only
//! source for tallies.

pub mod error;
pub mod log;
pub mod server;
pub mod service;
pub mod session;
pub mod tally;

pub use error::{JudgeError, Result};
pub use log::{read_log, JudgmentLog, JudgmentRecord};
pub use server::{router, serve};
pub use service::{Ack, NextPair, Progress, Service, Study, Submission};
pub use session::{Outcome, PairSpec, SessionSpec, StudySession, Verdict};
pub use tally::{sign_test, tally, tally_counts, Side, Tally, TallyMode};
