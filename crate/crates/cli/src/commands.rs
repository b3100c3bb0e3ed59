use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use bestview_core::corpus::{load_manifest, save_manifest, split_corpus, Corpus};
use bestview_core::evalharness::{
    accuracy, baseline_select, evaluate, model_select, permutation_test, render_report, BaselineKind, MetricReport,
    ReportFormat, ReportMetric, Selection, CONVENTION,
};
use bestview_core::posegeom::{load_tables, pose_label_table, save_tables, HeadLayout, PoseLabelTable, DEFAULT_BIN_DEG};
use bestview_core::pseudolabel::{label_corpus, load_labels, save_labels, AggregationPolicy, LabelConfig};
use bestview_core::selector::{build_samples, train, Checkpoint, TrainConfig};
use bestview_core::synthgen::{generate, SynthConfig};
use bestview_core::textmetrics::{CaptionScorer, Metric, TermLexicon};
use bestview_judgesvc::{read_log, tally, SessionSpec, Service, Side, Study, TallyMode};
use serde_json::{json, Value};

use crate::config::FileConfig;
use crate::*;

struct Ctx {
    file: FileConfig,
    seed: u64,
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn parse<T: std::str::FromStr>(what: &str, s: &str) -> Result<T> {
    s.parse().map_err(|_| usage(format!("invalid {what} {s:?}")))
}

fn provenance(command: &str, config: Value) -> Value {
    json!({
        "tool": concat!("bestview ", env!("CARGO_PKG_VERSION")),
        "command": command,
        "config": config,
    })
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn show(p: &Path) -> String {
    p.display().to_string()
}

pub fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p).map_err(|e| usage(format!("{e:#}")))?,
        None => FileConfig::default(),
    };
    let jobs = cli.jobs.or(file.jobs).unwrap_or(1);
    if jobs == 0 {
        return Err(usage("--jobs must be at least 1"));
    }
    // A second call (e.g. in tests) finds the pool already built; that is fine.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    let ctx = Ctx {
        seed: cli.seed.or(file.seed).unwrap_or(0),
        file,
    };
    match cli.command {
        Command::Validate(a) => validate(&ctx, a),
        Command::Split(a) => split(&ctx, a),
        Command::Pseudolabel(a) => pseudolabel(&ctx, a),
        Command::Poselabels(a) => poselabels(&ctx, a),
        Command::Train(a) => train_cmd(&ctx, a),
        Command::Select(a) => select_cmd(&ctx, a),
        Command::Evaluate(a) => evaluate_cmd(&ctx, a),
        Command::Synth(a) => synth(&ctx, a),
        Command::Serve(a) => serve(&ctx, a),
        Command::Tally(a) => tally_cmd(&ctx, a),
        Command::Report(a) => report(&ctx, a),
    }
}

fn validate(_ctx: &Ctx, a: ValidateArgs) -> Result<()> {
    let corpus = load_manifest(&a.manifest)?;
    let views = corpus.n_views().map_or("varies".to_string(), |n| n.to_string());
    println!(
        "{}: {} clips, {} views, f_dim {}, captioners {}",
        show(&a.manifest),
        corpus.len(),
        views,
        corpus.f_dim(),
        corpus.captioner_ids().join(",")
    );
    if let Some(p) = &a.labels {
        let labels = load_labels(p)?;
        for c in corpus.clips() {
            let l = labels
                .get(&c.clip_id)
                .with_context(|| format!("{}: no labels for clip {}", show(p), c.clip_id))?;
            if l.labels.is_empty() || l.labels.iter().any(|&v| v >= c.n_views()) {
                bail!("{}: clip {}: label out of range or empty", show(p), c.clip_id);
            }
        }
        println!("{}: labels cover all {} clips", show(p), corpus.len());
    }
    if let Some(p) = &a.poses {
        let tables = load_tables(p)?;
        for c in corpus.clips() {
            let t = tables
                .get(&c.clip_id)
                .with_context(|| format!("{}: no pose table for clip {}", show(p), c.clip_id))?;
            if t.n_views() != c.n_views() {
                bail!("{}: clip {}: table has {} views, clip has {}", show(p), c.clip_id, t.n_views(), c.n_views());
            }
        }
        println!("{}: pose tables cover all {} clips", show(p), corpus.len());
    }
    Ok(())
}

fn split(ctx: &Ctx, a: SplitArgs) -> Result<()> {
    let f: Vec<f64> = a
        .fractions
        .split(',')
        .map(|s| parse::<f64>("fraction", s.trim()))
        .collect::<Result<_>>()?;
    if f.len() != 3 {
        return Err(usage("--fractions needs three comma-separated values"));
    }
    let corpus = load_manifest(&a.manifest)?;
    let (tr, va, te) = split_corpus(&corpus, (f[0], f[1], f[2]), ctx.seed)?;
    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", show(&a.out_dir)))?;
    let prov = provenance(
        "split",
        json!({"manifest": show(&a.manifest), "fractions": f, "seed": ctx.seed}),
    );
    for (name, part) in [("train", &tr), ("val", &va), ("test", &te)] {
        let path = a.out_dir.join(format!("{name}.jsonl"));
        save_manifest(part, &path, Some(&prov))?;
        println!("{name}: {} clips -> {}", part.len(), show(&path));
    }
    Ok(())
}

fn label_config(ctx: &Ctx, a: &PseudolabelArgs) -> Result<LabelConfig> {
    let metric = a.metric.as_deref().or(ctx.file.metric.as_deref()).unwrap_or("cider");
    let policy = a.policy.as_deref().or(ctx.file.policy.as_deref()).unwrap_or("union");
    Ok(LabelConfig {
        metric: parse::<Metric>("metric", metric)?,
        policy: parse::<AggregationPolicy>("policy", policy)?,
        stem: !a.no_stem && ctx.file.stem.unwrap_or(true),
        captioners: a.captioners.clone().or_else(|| ctx.file.captioners.clone()),
    })
}

fn pseudolabel(ctx: &Ctx, a: PseudolabelArgs) -> Result<()> {
    let cfg = label_config(ctx, &a)?;
    let corpus = load_manifest(&a.manifest)?;
    let out = label_corpus(&corpus, &cfg)?;
    let prov = provenance(
        "pseudolabel",
        json!({
            "manifest": show(&a.manifest),
            "metric": format!("{:?}", cfg.metric).to_lowercase(),
            "policy": serde_json::to_value(cfg.policy)?,
            "stem": cfg.stem,
            "captioners": cfg.captioners,
        }),
    );
    save_labels(&out.labels, &a.out, Some(&prov))?;
    println!("labeled {} clips -> {}", out.labels.len(), show(&a.out));
    let fmt = |xs: &[f64]| xs.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ");
    println!("view frequency:     {}", fmt(&out.view_frequency));
    println!("label-set sizes 1..: {}", fmt(&out.set_size_frequency));
    Ok(())
}

fn tables_for(corpus: &Corpus, beta: u32) -> Result<BTreeMap<String, PoseLabelTable>> {
    corpus
        .clips()
        .iter()
        .map(|c| Ok((c.clip_id.clone(), pose_label_table(c, beta)?)))
        .collect()
}

fn beta(ctx: &Ctx, flag: Option<u32>) -> u32 {
    flag.or(ctx.file.beta).unwrap_or(DEFAULT_BIN_DEG)
}

fn poselabels(ctx: &Ctx, a: PoselabelsArgs) -> Result<()> {
    let beta = beta(ctx, a.beta);
    let corpus = load_manifest(&a.manifest)?;
    let tables = tables_for(&corpus, beta)?;
    let prov = provenance("poselabels", json!({"manifest": show(&a.manifest), "beta_deg": beta}));
    save_tables(&tables, &a.out, Some(&prov))?;
    let layout = HeadLayout::new(beta)?;
    println!(
        "{} pose tables ({} classes over heads {:?}) -> {}",
        tables.len(),
        layout.total_classes(),
        layout.head_sizes(),
        show(&a.out)
    );
    Ok(())
}

fn train_cmd(ctx: &Ctx, a: TrainArgs) -> Result<()> {
    let mut cfg: TrainConfig = ctx.file.train.clone().unwrap_or_default();
    cfg.seed = ctx.seed;
    if let Some(w) = a.w {
        cfg.w = w;
    }
    if let Some(lr) = a.lr {
        cfg.learning_rate = lr;
    }
    if let Some(h) = a.h_dim {
        cfg.h_dim = h;
    }
    if let Some(b) = a.batch_size {
        cfg.batch_size = b;
    }
    if let Some(e) = a.max_epochs {
        cfg.max_epochs = e;
    }
    if let Some(p) = a.patience {
        cfg.patience = p;
    }
    cfg.single_label |= a.single_label;

    let beta = beta(ctx, a.beta);
    let tr = load_manifest(&a.train)?;
    let va = load_manifest(&a.val)?;
    let labels = load_labels(&a.labels)?;
    let mut tables = match &a.poses {
        Some(p) => load_tables(p)?,
        None => tables_for(&tr, beta)?,
    };
    if a.poses.is_none() {
        tables.extend(tables_for(&va, beta)?);
    }
    let layout = match tables.values().next() {
        Some(t) => HeadLayout::new(t.bin_deg)?,
        None => HeadLayout::new(beta)?,
    };
    let train_samples = build_samples(&tr, &labels, &tables)?;
    let val_samples = build_samples(&va, &labels, &tables)?;
    let (params, history) = train(&train_samples, &val_samples, layout, &cfg)?;
    if let Some(h) = &a.history {
        let mut buf = Vec::new();
        history.write_csv(&mut buf)?;
        fs::write(h, buf).with_context(|| format!("writing {}", show(h)))?;
    }
    let best = history.epochs.iter().find(|e| e.epoch == history.best_epoch);
    Checkpoint::new(cfg, params, history.clone()).save(&a.out)?;
    match best {
        Some(e) => println!(
            "stopped after epoch {}, best epoch {} (val L^S {:.4}, val acc {:.3}) -> {}",
            history.stopped_epoch,
            e.epoch,
            e.val_total,
            e.val_accuracy,
            show(&a.out)
        ),
        None => println!("stopped after epoch {}, kept initialization -> {}", history.stopped_epoch, show(&a.out)),
    }
    Ok(())
}

fn select_cmd(ctx: &Ctx, a: SelectArgs) -> Result<()> {
    let corpus = load_manifest(&a.manifest)?;
    let ckpt = Checkpoint::load(&a.checkpoint)?;
    let sel = model_select(&ckpt.params, &corpus, &a.name)?;
    let mut v = serde_json::to_value(&sel)?;
    v["_provenance"] = provenance(
        "select",
        json!({"manifest": show(&a.manifest), "checkpoint": show(&a.checkpoint), "seed": ctx.seed}),
    );
    write_json(&a.out, &v)?;
    println!("selected views for {} clips -> {}", sel.choices.len(), show(&a.out));
    Ok(())
}

fn load_planted(path: &Path) -> Result<BTreeMap<String, usize>> {
    let v = read_json(path)?;
    serde_json::from_value(v.get("planted").cloned().unwrap_or(v)).with_context(|| format!("parsing {}", show(path)))
}

fn parse_compare(specs: &[String]) -> Result<Vec<(String, String)>> {
    specs
        .iter()
        .map(|s| match s.split_once(',') {
            Some((x, y)) if !x.is_empty() && !y.is_empty() => Ok((x.to_string(), y.to_string())),
            _ => Err(usage(format!("--compare expects A,B, got {s:?}"))),
        })
        .collect()
}

fn significance(reports: &[MetricReport], pairs: &[(String, String)], iterations: usize, seed: u64) -> Result<String> {
    let mut out = String::new();
    for (x, y) in pairs {
        let find = |n: &str| {
            reports
                .iter()
                .find(|r| r.policy_name == n)
                .ok_or_else(|| usage(format!("--compare: no report named {n:?}")))
        };
        let (rx, ry) = (find(x)?, find(y)?);
        let ps = ReportMetric::ALL
            .iter()
            .map(|&m| Ok(format!("{} p={:.4}", m.label(), permutation_test(rx, ry, m, iterations, seed)?)))
            .collect::<Result<Vec<_>>>()?;
        out.push_str(&format!("# {x} vs {y} ({iterations} sign flips): {}\n", ps.join(", ")));
    }
    Ok(out)
}

fn render_with_provenance(reports: &[MetricReport], format: ReportFormat, prov: &Value) -> Result<String> {
    let table = render_report(reports, format)?;
    Ok(match format {
        ReportFormat::Json => {
            let mut v: Value = serde_json::from_str(&table)?;
            v["_provenance"] = prov.clone();
            serde_json::to_string_pretty(&v)? + "\n"
        }
        ReportFormat::Text => format!("# provenance: {prov}\n{table}"),
        ReportFormat::Csv => table,
    })
}

fn evaluate_cmd(ctx: &Ctx, a: EvaluateArgs) -> Result<()> {
    let format: ReportFormat = parse("format", &a.format)?;
    let pairs = parse_compare(&a.compare)?;
    let iterations = a.iterations.or(ctx.file.iterations).unwrap_or(10_000);
    let kinds: Vec<BaselineKind> = a
        .baselines
        .iter()
        .filter(|s| !s.is_empty() && s.as_str() != "none")
        .map(|s| parse::<BaselineKind>("baseline", s))
        .collect::<Result<_>>()?;

    let corpus = load_manifest(&a.manifest)?;
    let eval_cap = match a.eval_captioner.clone().or_else(|| ctx.file.eval_captioner.clone()) {
        Some(c) => c,
        None => corpus.captioner_ids()[0].clone(),
    };
    if !corpus.captioner_ids().contains(&eval_cap) {
        bail!("captioner {eval_cap:?} is not in {}", show(&a.manifest));
    }
    let mut idf_corpora = Vec::new();
    for p in &a.idf_from {
        idf_corpora.push(load_manifest(p)?);
    }
    let narrations: Vec<&str> = if idf_corpora.is_empty() {
        corpus.clips().iter().map(|c| c.narration.as_str()).collect()
    } else {
        idf_corpora.iter().flat_map(|c| c.clips().iter().map(|c| c.narration.as_str())).collect()
    };
    let scorer = CaptionScorer::new(Metric::Cider, true, narrations)?;
    let lexicon = TermLexicon::default();

    let mut selections: Vec<Selection> = Vec::new();
    for spec in &a.checkpoint {
        let (name, path) = match spec.split_once('=') {
            Some((n, p)) => (n.to_string(), PathBuf::from(p)),
            None => ("ours".to_string(), PathBuf::from(spec)),
        };
        let ckpt = Checkpoint::load(&path)?;
        selections.push(model_select(&ckpt.params, &corpus, &name)?);
    }
    for p in &a.selection {
        let sel: Selection =
            serde_json::from_value(read_json(p)?).with_context(|| format!("parsing selection {}", show(p)))?;
        selections.push(sel);
    }
    for k in kinds {
        selections.push(baseline_select(&corpus, k, ctx.seed, &eval_cap, &scorer)?);
    }
    if selections.is_empty() {
        return Err(usage("nothing to evaluate: give --checkpoint, --selection or --baselines"));
    }
    let reports = selections
        .iter()
        .map(|s| evaluate(s, &corpus, &eval_cap, &scorer, &lexicon))
        .collect::<bestview_core::Result<Vec<_>>>()?;

    let prov = provenance(
        "evaluate",
        json!({
            "manifest": show(&a.manifest),
            "eval_captioner": eval_cap,
            "checkpoints": a.checkpoint,
            "selections": a.selection.iter().map(|p| show(p)).collect::<Vec<_>>(),
            "baselines": a.baselines,
            "idf_from": a.idf_from.iter().map(|p| show(p)).collect::<Vec<_>>(),
            "seed": ctx.seed,
            "iterations": iterations,
        }),
    );
    let mut text = render_with_provenance(&reports, format, &prov)?;
    if format != ReportFormat::Csv {
        if let Some(p) = &a.planted {
            let planted = load_planted(p)?;
            for s in &selections {
                text.push_str(&format!("# top-1 accuracy vs planted, {}: {:.3}\n", s.policy_name, accuracy(s, &planted)));
            }
        }
        text.push_str(&significance(&reports, &pairs, iterations, ctx.seed)?);
    }
    print!("{text}");
    if let Some(out) = &a.out {
        fs::write(out, &text).with_context(|| format!("writing {}", show(out)))?;
    }
    if let Some(save) = &a.save {
        write_json(
            save,
            &json!({"_provenance": prov, "convention": CONVENTION, "reports": reports}),
        )?;
    }
    Ok(())
}

fn synth(ctx: &Ctx, a: SynthArgs) -> Result<()> {
    let mut cfg: SynthConfig = ctx.file.synth.clone().unwrap_or_default();
    cfg.seed = ctx.seed;
    let set = |dst: &mut usize, v: Option<usize>| {
        if let Some(v) = v {
            *dst = v;
        }
    };
    set(&mut cfg.n_clips, a.clips);
    set(&mut cfg.n_views, a.views);
    set(&mut cfg.f_dim, a.f_dim);
    set(&mut cfg.n_captioners, a.captioners);
    set(&mut cfg.vocab_size, a.vocab);
    set(&mut cfg.narration_len, a.narration_len);
    set(&mut cfg.verbose_extra_tokens, a.verbose_extra);
    let setf = |dst: &mut f64, v: Option<f64>| {
        if let Some(v) = v {
            *dst = v;
        }
    };
    setf(&mut cfg.corruption_rate, a.rho);
    setf(&mut cfg.captioner_noise, a.captioner_noise);
    setf(&mut cfg.max_other_quality, a.max_other_quality);
    setf(&mut cfg.feature_snr, a.snr);
    setf(&mut cfg.camera_radius, a.radius);

    let out = generate(&cfg)?;
    let prov = provenance("synth", serde_json::to_value(&cfg)?);
    save_manifest(&out.corpus, &a.out, Some(&prov))?;
    if let Some(p) = &a.planted {
        write_json(p, &json!({"_provenance": prov, "planted": out.planted}))?;
    }
    println!(
        "{} clips x {} views, {} captioners -> {}",
        cfg.n_clips,
        cfg.n_views,
        cfg.n_captioners,
        show(&a.out)
    );
    Ok(())
}

fn serve(_ctx: &Ctx, a: ServeArgs) -> Result<()> {
    let addr: std::net::SocketAddr = parse("address", &a.addr)?;
    let mut service = Service::new(a.media_dir.clone());
    for p in &a.session {
        let spec = SessionSpec::load(p)?;
        service.add(Study::create(&a.data_dir, spec)?)?;
    }
    let ids: Vec<&str> = service.session_ids().collect();
    eprintln!("serving sessions {} on http://{addr}", ids.join(", "));
    let rt = tokio::runtime::Runtime::new().context("starting async runtime")?;
    rt.block_on(bestview_judgesvc::serve(Arc::new(service), addr))
        .with_context(|| format!("serving on {addr}"))
}

fn tally_cmd(_ctx: &Ctx, a: TallyArgs) -> Result<()> {
    let side: Side = parse("policy", &a.policy)?;
    let mode: TallyMode = parse("mode", &a.mode)?;
    let t = tally(&read_log(&a.log)?, side, mode)?;
    println!("win {:.1}  loss {:.1}  tie {:.1}  (n = {}, sign test p = {:.4})", t.win, t.loss, t.tie, t.n, t.p);
    Ok(())
}

fn report(ctx: &Ctx, a: ReportArgs) -> Result<()> {
    let format: ReportFormat = parse("format", &a.format)?;
    let pairs = parse_compare(&a.compare)?;
    let iterations = a.iterations.or(ctx.file.iterations).unwrap_or(10_000);
    let mut reports: Vec<MetricReport> = Vec::new();
    for p in &a.reports {
        let v = read_json(p)?;
        let rs: Vec<MetricReport> = serde_json::from_value(v.get("reports").cloned().unwrap_or(Value::Null))
            .with_context(|| format!("{}: expected a file written by `evaluate --save`", show(p)))?;
        reports.extend(rs);
    }
    let mut text = render_report(&reports, format)?;
    if format != ReportFormat::Csv {
        text.push_str(&significance(&reports, &pairs, iterations, ctx.seed)?);
    }
    print!("{text}");
    Ok(())
}
