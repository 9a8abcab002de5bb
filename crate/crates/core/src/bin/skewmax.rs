use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};

use skewmax::covering::{greedy_cover, CoverOptions};
use skewmax::cylinder::{build_family, read_family};
use skewmax::domain::{frobenius, Point, ORIGIN};
use skewmax::flow::{flow_trajectory, MollifiedVelocity};
use skewmax::maximal::{dyadic_eps_grid, skewed_maximal_with, MaximalOptions};
use skewmax::spacetime::{BoxIndicator, Constant, SmoothBump, SpacetimeFn, SpacetimeGrid, SupportBox};
use skewmax::verify::{run_suite, Context, ExperimentSpec};
use skewmax::{Error, Result};

/// Maximal functions over flow-adapted cylinders: every pipeline as a
/// subcommand, CSV and plain-text outputs.
#[derive(Parser)]
#[command(name = "skewmax", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Experiment configuration (`[section]` headers, `key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `suite.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Mollified velocity and gradient on the spatial lattice
    /// (`mollify.csv`).
    Mollify,
    /// Mollified trajectories from a lattice of seeds (`flow.csv`).
    Flow,
    /// Skewed maximal function of a test function (`maximal.csv`,
    /// `maximal_summary.txt`).
    Maximal,
    /// Greedy disjoint subfamily of admissible cylinders (`cover.csv`,
    /// `cover_summary.txt`).
    Cover,
    /// The verification suite (`verify_report.txt`, `verify_report.csv`);
    /// exits nonzero when a mandatory check fails.
    Verify,
}

fn main() -> ExitCode {
    let help = format!("Configuration defaults:\n\n{}", ExperimentSpec::default().to_text());
    let matches = Cli::command().after_long_help(help).get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> Result<bool> {
    let mut spec = match &cli.config {
        Some(p) => ExperimentSpec::load(p)?,
        None => ExperimentSpec::default(),
    };
    if let Some(s) = cli.seed {
        spec.suite.seed = s;
    }
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?;
    }
    fs::create_dir_all(&cli.out)?;
    match cli.cmd {
        Cmd::Mollify => mollify(&spec, &cli.out).map(|_| true),
        Cmd::Flow => flow(&spec, &cli.out).map(|_| true),
        Cmd::Maximal => maximal(&spec, &cli.out).map(|_| true),
        Cmd::Cover => cover(&spec, &cli.out).map(|_| true),
        Cmd::Verify => verify(&spec, &cli.out),
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn axis_names(prefix: &str, d: usize) -> String {
    (1..=d).map(|a| format!("{prefix}_{a}")).collect::<Vec<_>>().join(",")
}

fn mollify(spec: &ExperimentSpec, out: &Path) -> Result<()> {
    let ctx = Context::new(spec)?;
    let d = ctx.dim();
    let grid = SpacetimeGrid::full(&ctx.domain, spec.grid.spatial, 1)?;
    let mut w = create(out, "mollify.csv")?;
    let grads: Vec<String> = (1..=d).flat_map(|i| (1..=d).map(move |j| format!("g_{i}{j}"))).collect();
    writeln!(w, "eps,t,{},{},{},grad_norm", axis_names("x", d), axis_names("u", d), grads.join(","))?;
    for &eps in &spec.mollify.eps {
        let u = MollifiedVelocity::new(&ctx.field, &ctx.mollifier, eps)?;
        for &t in &spec.mollify.times {
            for i in 0..grid.spatial_len() {
                let x = grid.node(i);
                let v = u.velocity(t, &x);
                let g = u.gradient(t, &x);
                let mut line = format!("{eps},{t}");
                for a in 0..d {
                    let _ = write!(line, ",{}", x[a]);
                }
                for a in 0..d {
                    let _ = write!(line, ",{}", v[a]);
                }
                for row in g.iter().take(d) {
                    for v in row.iter().take(d) {
                        let _ = write!(line, ",{v}");
                    }
                }
                writeln!(w, "{line},{}", frobenius(&g, d))?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn flow(spec: &ExperimentSpec, out: &Path) -> Result<()> {
    let ctx = Context::new(spec)?;
    let d = ctx.dim();
    let fc = &spec.flow;
    let u = ctx.velocity(fc.eps)?;
    let seeds = SpacetimeGrid::full(&ctx.domain, fc.seeds.max(1), 1)?;
    let mut w = create(out, "flow.csv")?;
    writeln!(w, "seed,time,{}", axis_names("x", d))?;
    for i in 0..seeds.spatial_len() {
        let x0 = seeds.node(i);
        let tr = flow_trajectory(&u, fc.t, &x0, fc.s, spec.quadrature.step_budget)?;
        for (s, p) in tr.samples() {
            let coords: Vec<String> = p[..d].iter().map(|v| v.to_string()).collect();
            writeln!(w, "{i},{s},{}", coords.join(","))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `a f`, keeping the support of `f`.
struct Scaled<F>(f64, F);

impl<F: SpacetimeFn> SpacetimeFn for Scaled<F> {
    fn eval(&self, t: f64, x: &Point) -> f64 {
        self.0 * self.1.eval(t, x)
    }

    fn support(&self) -> Option<SupportBox> {
        self.1.support()
    }
}

fn test_function(spec: &ExperimentSpec, ctx: &Context) -> Result<Box<dyn SpacetimeFn>> {
    let dom = ctx.domain;
    let mc = &spec.maximal;
    let mid = 0.5 * (dom.start() + dom.end());
    let mut c: Point = ORIGIN;
    for v in c.iter_mut().take(dom.dim()) {
        *v = 0.5 * dom.period();
    }
    Ok(match mc.function.as_str() {
        "box" => Box::new(Scaled(mc.amplitude, BoxIndicator::new(dom, mid, mc.radius, c, mc.radius))),
        "bump" => Box::new(SmoothBump::new(dom, mid, mc.radius, c, mc.radius, mc.amplitude)),
        "constant" => Box::new(Constant(mc.amplitude)),
        other => return Err(Error::InvalidParameter(format!("unknown test function `{other}` (box, bump, constant)"))),
    })
}

fn maximal(spec: &ExperimentSpec, out: &Path) -> Result<()> {
    let ctx = Context::new(spec)?;
    let f = test_function(spec, &ctx)?;
    let grid = SpacetimeGrid::full(&ctx.domain, spec.grid.spatial / spec.grid.stride, spec.grid.times)?;
    let eps_grid = dyadic_eps_grid(&ctx.domain, ctx.domain.period() / spec.grid.spatial as f64);
    let mut opts = MaximalOptions::new(ctx.dim(), spec.suite.eta, eps_grid);
    opts.quad = ctx.quad.clone();
    opts.step_budget = spec.quadrature.step_budget;
    let mf = skewed_maximal_with(&ctx.field, &ctx.mollifier, f.as_ref(), &grid, &opts, &ctx.hl)?;
    mf.write_csv(create(out, "maximal.csv")?)?;
    let s = mf.summary();
    // sup |f| of every test function is |amplitude|
    let f_sup = spec.maximal.amplitude.abs();
    let eps: Vec<String> = s.eps_grid.iter().map(|e| e.to_string()).collect();
    let text = format!(
        "eta = {}\neps_grid = {}\npoints = {}\ncell_volume = {:e}\nsup = {:e}\nf_sup = {:e}\nlinf_bound_holds = {}\nl1 = {:e}\nl2 = {:e}\nflagged_fraction = {}\n",
        s.eta,
        eps.join(" "),
        s.points,
        s.cell_volume,
        s.sup,
        f_sup,
        s.sup <= f_sup,
        s.l1,
        s.l2,
        s.flagged_fraction
    );
    fs::write(out.join("maximal_summary.txt"), text)?;
    Ok(())
}

fn cover(spec: &ExperimentSpec, out: &Path) -> Result<()> {
    let ctx = Context::new(spec)?;
    let family = match &spec.cover.family {
        Some(p) => {
            let rows = read_family(BufReader::new(File::open(p)?), ctx.dim())?;
            build_family(&ctx.field, &ctx.mollifier, &rows)?
        }
        None => {
            let mut rng = ctx.rng(0);
            let region = (0.005 * ctx.domain.duration(), 0.05 * ctx.domain.period());
            let mut fam = Vec::new();
            for _ in 0..spec.monte_carlo.family_size {
                if let Some(c) = ctx.random_admissible(&mut rng, spec.suite.eta, Some(region))? {
                    fam.push(c);
                }
            }
            fam
        }
    };
    let opts = CoverOptions { n_probe: spec.quadrature.probes, n_mc: spec.monte_carlo.samples, seed: spec.suite.seed };
    let rep = greedy_cover(&family, &opts)?;
    rep.write_csv(create(out, "cover.csv")?, &family)?;
    fs::write(out.join("cover_summary.txt"), rep.summary())?;
    Ok(())
}

fn verify(spec: &ExperimentSpec, out: &Path) -> Result<bool> {
    let report = run_suite(spec)?;
    fs::write(out.join("verify_report.txt"), report.to_text())?;
    fs::write(out.join("verify_report.csv"), report.to_csv())?;
    eprint!("{}", report.runtimes_text());
    Ok(report.passed())
}
