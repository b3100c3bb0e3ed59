use bestview_judgesvc::service::log_file;
use bestview_judgesvc::{
    read_log, tally, JudgeError, NextPair, PairSpec, SessionSpec, Side, Study, Submission, TallyMode,
};

use crate::{ensure, Check};

fn spec() -> SessionSpec {
    SessionSpec {
        session_id: "replay".into(),
        seed: 11,
        pairs: (0..10)
            .map(|i| PairSpec {
                clip_id: format!("clip{i}"),
                view_a: 0,
                view_b: 2,
                uri_a: format!("/media/ours_{i}.mp4"),
                uri_b: format!("/media/base_{i}.mp4"),
            })
            .collect(),
    }
}

fn submission(pair_index: usize, verdict: &str) -> Submission {
    Submission {
        session_id: "replay".into(),
        judge_id: "judge-1".into(),
        pair_index,
        verdict: verdict.into(),
    }
}

pub fn log_replay() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let study = Study::create(dir.path(), spec()).map_err(|e| e.to_string())?;

    // Eight wins for side a, one loss, one tie, answered through the
    // judge's randomized left/right presentation.
    let mut k = 0;
    let mut swapped = 0;
    while let NextPair::Pair { pair_index, left_uri, .. } = study.next_pair("judge-1").map_err(|e| e.to_string())? {
        let a_left = left_uri.contains("ours");
        swapped += usize::from(!a_left);
        let verdict = match k {
            0..=7 => if a_left { "first" } else { "second" },
            8 => if a_left { "second" } else { "first" },
            _ => "both",
        };
        study.submit(&submission(pair_index, verdict)).map_err(|e| e.to_string())?;
        k += 1;
    }
    ensure!(k == 10, "served {k} pairs, expected 10");

    let live = study.tally(Side::A, TallyMode::Judgment).map_err(|e| e.to_string())?;
    ensure!(
        (live.win, live.loss, live.tie) == (80.0, 10.0, 10.0),
        "live tally {:?}",
        (live.win, live.loss, live.tie)
    );

    let path = log_file(dir.path(), "replay");
    let before = std::fs::read(&path).map_err(|e| e.to_string())?;
    let replayed = tally(&read_log(&path).map_err(|e| e.to_string())?, Side::A, TallyMode::Judgment)
        .map_err(|e| e.to_string())?;
    ensure!(replayed == live, "replayed {replayed:?} != live {live:?}");

    let first = read_log(&path).map_err(|e| e.to_string())?[0].pair_index;
    match study.submit(&submission(first, "second")) {
        Err(JudgeError::Duplicate { .. }) => {}
        other => return Err(format!("duplicate submission not rejected: {other:?}")),
    }
    let after = std::fs::read(&path).map_err(|e| e.to_string())?;
    ensure!(before == after, "log changed after a rejected duplicate");

    drop(study);
    let reopened = Study::create(dir.path(), spec()).map_err(|e| e.to_string())?;
    let again = reopened.tally(Side::A, TallyMode::Judgment).map_err(|e| e.to_string())?;
    ensure!(again == live, "tally after restart {again:?} != {live:?}");

    Ok(format!(
        "8/1/1 -> ({:.1}, {:.1}, {:.1}), p = {:.4}; {swapped} of 10 pairs shown swapped; replay and restart match; duplicate rejected with log unchanged",
        live.win, live.loss, live.tie, live.p
    ))
}
