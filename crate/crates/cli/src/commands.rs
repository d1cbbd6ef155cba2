use std::fmt::Write as _;
use std::fs;
use std::ops::ControlFlow;
use std::path::Path;
use std::time::Instant;

use subgraph_gcn::gcn::{evaluate, AdamConfig, CoeffMode, Reduction, TrainConfig, TrainState, Trainer};
use subgraph_gcn::io::{self, CoeffCacheInfo, SbmSpec};
use subgraph_gcn::norm::{analytic_coeffs_edge, estimate_coeffs, Counters, NormCoeffs};
use subgraph_gcn::sampler::pool::{produce_ordered, PoolOptions};
use subgraph_gcn::sampler::{edge_weights, Sampler, SamplerConfig, SamplerKind};
use subgraph_gcn::variance::{edge_aggregates, optimal_edge_probs, variance_closed_form, variance_monte_carlo};
use subgraph_gcn::{Dataset, Error, Head, Model, Result, Scalar, Split};

use crate::args::{
    BenchArgs, Cli, CoeffName, Command, DataArgs, EstimateArgs, EvalArgs, GenArgs, GenKind, SampleArgs, TrainArgs,
    VarianceArgs,
};

pub fn run(cli: Cli) -> Result<()> {
    if cli.f32 {
        dispatch::<f32>(&cli)
    } else {
        dispatch::<f64>(&cli)
    }
}

fn dispatch<F: Scalar>(cli: &Cli) -> Result<()> {
    let threads = cli.threads();
    match &cli.command {
        Command::Gen(a) => gen::<F>(a),
        Command::Sample(a) => sample::<F>(a, threads),
        Command::Estimate(a) => estimate::<F>(a, threads),
        Command::Train(a) => train::<F>(a, threads),
        Command::Eval(a) => eval::<F>(a),
        Command::VarianceCheck(a) => variance_check::<F>(a, threads),
        Command::Bench(a) => bench::<F>(a, threads),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn load<F: Scalar>(a: &DataArgs) -> Result<Dataset<F>> {
    io::load_dataset(&a.data, a.self_loops)
}

fn gen<F: Scalar>(a: &GenArgs) -> Result<()> {
    let ds: Dataset<F> = match a.kind {
        GenKind::Sbm {
            blocks,
            nodes_per_block,
            p_intra,
            p_inter,
            noise,
        } => io::generate_sbm(&SbmSpec {
            blocks,
            nodes_per_block,
            p_intra,
            p_inter,
            noise,
            self_loops: false,
            seed: a.seed,
        })?,
        GenKind::Er {
            nodes,
            p,
            features,
            classes,
        } => io::random_dataset(io::generate_er(nodes, p, a.seed)?, features, classes, a.seed)?,
        GenKind::Regular {
            degree,
            nodes,
            features,
            classes,
        } => io::random_dataset(io::generate_regular(degree, nodes, a.seed)?, features, classes, a.seed)?,
    };
    io::save_dataset(&ds, &a.out)?;
    println!(
        "nodes {} edges {} features {} classes {}",
        ds.num_nodes(),
        ds.graph.num_edges(),
        ds.feature_dim(),
        ds.labels.num_classes()
    );
    Ok(())
}

fn sample<F: Scalar>(a: &SampleArgs, threads: usize) -> Result<()> {
    let ds = load::<F>(&a.data)?;
    let cfg = a.sampler.config(a.seed)?;
    let sampler = Sampler::new(&ds.graph, cfg)?;
    let mut subgraphs = Vec::with_capacity(a.count as usize);
    let (mut nodes, mut edges, mut early) = (0usize, 0usize, 0usize);
    let options = PoolOptions { threads, ..Default::default() };
    produce_ordered(&sampler, 0..a.count, options, |_, s| {
        nodes += s.subgraph.num_nodes();
        edges += s.subgraph.num_edges(&ds.graph);
        early += s.early_stops;
        subgraphs.push(s.subgraph);
        Ok(ControlFlow::Continue(()))
    })?;
    create_dir(&a.out)?;
    io::save_subgraphs(&a.out.join("subgraphs.bin"), &ds.graph, &cfg, &subgraphs)?;
    let k = a.count.max(1) as f64;
    println!(
        "subgraphs {} mean_nodes {} mean_edges {} early_stops {}",
        a.count,
        nodes as f64 / k,
        edges as f64 / k,
        early
    );
    Ok(())
}

fn estimate<F: Scalar>(a: &EstimateArgs, threads: usize) -> Result<()> {
    let ds = load::<F>(&a.data)?;
    let cfg = a.sampler.config(a.seed)?;
    let n = match a.presample {
        Some(n) => n,
        None => subgraph_gcn::norm::default_presample_count(&Sampler::new(&ds.graph, cfg)?, 10)?,
    };
    let (mut coeffs, subgraphs) = estimate_coeffs(&ds.graph, cfg, n, threads)?;
    if a.analytic {
        let SamplerKind::EdgeIndependent { m } = cfg.kind else {
            return Err(Error::InvalidConfig("--analytic needs --sampler edge-indep".into()));
        };
        coeffs = analytic_coeffs_edge(&ds.graph, m)?;
    }
    create_dir(&a.out)?;
    let info = CoeffCacheInfo {
        sampler: cfg,
        presample: n as u64,
    };
    io::save_coeffs(&a.out.join("coeffs.bin"), &ds.graph, &info, &coeffs)?;
    io::save_subgraphs(&a.out.join("subgraphs.bin"), &ds.graph, &cfg, &subgraphs)?;
    let unobserved = coeffs.observed().iter().filter(|&&o| !o).count();
    let mean_lambda = coeffs.lambdas().iter().map(|l| l.as_f64()).sum::<f64>() / ds.num_nodes() as f64;
    println!("presample {n} mean_lambda {mean_lambda} unobserved_arcs {unobserved}");
    Ok(())
}

fn train_config(a: &TrainArgs, threads: usize) -> Result<TrainConfig> {
    if a.layers == 0 {
        return Err(Error::InvalidConfig("--layers must be at least 1".into()));
    }
    Ok(TrainConfig {
        hidden: vec![a.hidden; a.layers - 1],
        adam: AdamConfig {
            lr: a.lr,
            beta1: a.beta1,
            beta2: a.beta2,
            eps: a.eps,
        },
        dropout: a.dropout,
        epochs: a.epochs,
        minibatches_per_epoch: a.minibatches,
        eval_every: a.eval_every,
        seed: a.seed,
        presample: a.presample,
        coeffs: match a.coeffs {
            CoeffName::Empirical => CoeffMode::Empirical,
            CoeffName::Analytic => CoeffMode::Analytic,
            CoeffName::Unit => CoeffMode::Unit,
        },
        reduction: if a.mean_loss { Reduction::Mean } else { Reduction::Sum },
        threads,
        queue_capacity: a.queue_capacity,
    })
}

fn check_cache_sampler(found: &SamplerConfig, expected: &SamplerConfig, path: &Path) -> Result<()> {
    if found != expected {
        return Err(Error::InvalidConfig(format!(
            "{} was built with sampler {found:?}, not {expected:?}",
            path.display()
        )));
    }
    Ok(())
}

fn build_trainer<'d, F: Scalar>(a: &TrainArgs, ds: &'d Dataset<F>, threads: usize) -> Result<Trainer<'d, F>> {
    let cfg = a.sampler.config(a.seed)?;
    let tc = train_config(a, threads)?;
    let subgraphs = match &a.subgraph_cache {
        Some(path) => {
            let (found, subs) = io::load_subgraphs(path, &ds.graph)?;
            check_cache_sampler(&found, &cfg, path)?;
            Some(subs)
        }
        None => None,
    };
    let coeffs = match &a.coeff_cache {
        Some(path) => {
            let (info, c) = io::load_coeffs(path, &ds.graph)?;
            check_cache_sampler(&info.sampler, &cfg, path)?;
            Some(c)
        }
        None => None,
    };
    match (coeffs, subgraphs) {
        (None, None) => Trainer::new(ds, cfg, tc),
        (Some(c), subs) => Trainer::with_coeffs(ds, cfg, tc, c, subs.unwrap_or_default()),
        (None, Some(subs)) => {
            let mut counters = Counters::new(&ds.graph);
            for s in &subs {
                counters.record(&ds.graph, s);
            }
            Trainer::with_coeffs(ds, cfg, tc, NormCoeffs::from_counters(&ds.graph, counters)?, subs)
        }
    }
}

fn train<F: Scalar>(a: &TrainArgs, threads: usize) -> Result<()> {
    let ds = load::<F>(&a.data)?;
    let trainer = build_trainer(a, &ds, threads)?;
    let mut state: TrainState<F> = match &a.resume {
        Some(path) => io::load_checkpoint(path, &ds.graph)?,
        None => trainer.init_state()?,
    };
    create_dir(&a.out)?;
    let already = state.log.len();
    trainer.run_until(&mut state, a.epochs)?;
    for entry in &state.log[already..] {
        println!("{entry}");
    }
    io::save_checkpoint(&a.out.join("checkpoint.bin"), &ds.graph, &state)?;
    let log = state.log.clone();
    let outcome = trainer.finish(state)?;
    let mut text = String::new();
    for entry in &log {
        writeln!(text, "{entry}").unwrap();
    }
    writeln!(text, "test_f1 {}", outcome.test_f1).unwrap();
    write_text(&a.out.join("metrics.log"), &text)?;
    println!("test_f1 {}", outcome.test_f1);
    if outcome.skipped > 0 {
        eprintln!("skipped {} minibatches without training nodes", outcome.skipped);
    }
    Ok(())
}

fn eval<F: Scalar>(a: &EvalArgs) -> Result<()> {
    let ds = load::<F>(&a.data)?;
    let state: TrainState<F> = io::load_checkpoint(&a.checkpoint, &ds.graph)?;
    let model = state.best.map_or(state.model, |(_, m)| m);
    for (name, split) in [("val_f1", Split::Val), ("test_f1", Split::Test)] {
        println!("{name} {}", evaluate(&model, &ds, split)?);
    }
    Ok(())
}

fn variance_check<F: Scalar>(a: &VarianceArgs, threads: usize) -> Result<()> {
    let ds = load::<F>(&a.data)?;
    if a.layers == 0 {
        return Err(Error::InvalidConfig("--layers must be at least 1".into()));
    }
    let width = a.width.unwrap_or(ds.labels.num_classes());
    let mut dims = vec![ds.feature_dim()];
    dims.extend(std::iter::repeat_n(width, a.layers));
    let model = Model::glorot(&dims, Head::from(ds.labels.mode()), a.seed)?;
    let aggs = edge_aggregates(&ds.graph, &ds.features, &model)?;
    let optimal = optimal_edge_probs(&aggs, F::of_usize(a.m))?;
    let topology = edge_weights(&ds.graph)?.inclusion_probabilities(a.m);

    let mut table = String::from("edge\tu\tv\tnorm\tp_optimal\tp_topology\n");
    for (i, &e) in aggs.edges().iter().enumerate() {
        let (u, v) = ds.graph.edge(e);
        writeln!(table, "{e}\t{u}\t{v}\t{}\t{}\t{}", aggs.norms()[i], optimal[i], topology[i]).unwrap();
    }
    let mut summary = String::new();
    for (name, probs) in [("optimal", &optimal), ("topology", &topology)] {
        let closed = variance_closed_form(&aggs, probs)?;
        let mc = variance_monte_carlo(&aggs, probs, a.trials, a.seed, threads)?;
        writeln!(
            summary,
            "{name}\tclosed_form {closed}\tmonte_carlo {}\tstd_error {}",
            mc.variance, mc.std_error
        )
        .unwrap();
    }
    create_dir(&a.out)?;
    write_text(&a.out.join("variance.tsv"), &table)?;
    write_text(&a.out.join("variance_summary.txt"), &summary)?;
    print!("{summary}");
    Ok(())
}

fn bench<F: Scalar>(a: &BenchArgs, threads: usize) -> Result<()> {
    let ds = load::<F>(&a.data)?;
    let cfg = a.sampler.config(a.seed)?;
    let sampler = Sampler::new(&ds.graph, cfg)?;
    let mut counts = vec![1];
    if threads > 1 {
        counts.push(threads);
    }
    for t in counts {
        let start = Instant::now();
        let options = PoolOptions { threads: t, ..Default::default() };
        produce_ordered(&sampler, 0..a.count, options, |_, _| Ok(ControlFlow::Continue(())))?;
        let secs = start.elapsed().as_secs_f64();
        println!("sample threads {t} subgraphs {} seconds {secs:.4} per_second {:.1}", a.count, a.count as f64 / secs);
    }
    let tc = TrainConfig {
        hidden: vec![a.hidden],
        epochs: 1,
        minibatches_per_epoch: Some(a.iterations.max(1)),
        eval_every: 0,
        seed: a.seed,
        presample: Some(a.iterations.max(1)),
        threads,
        ..Default::default()
    };
    let trainer = Trainer::new(&ds, cfg, tc)?;
    let mut state = trainer.init_state()?;
    let start = Instant::now();
    trainer.run_until(&mut state, 1)?;
    let secs = start.elapsed().as_secs_f64();
    println!(
        "train iterations {} seconds {secs:.4} per_iteration {:.5}",
        a.iterations,
        secs / a.iterations.max(1) as f64
    );
    Ok(())
}
