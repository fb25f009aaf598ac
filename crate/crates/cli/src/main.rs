//! Command-line front end: simulate, inspect fields, check Hamilton–Jacobi
//! residuals and reductions for systems described in config files.

mod report;

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use distham::calculus::{bracket_generating, SmoothMap};
use distham::dynamics::{diagnostics, integrate_with_momentum, nonholonomic_field, projection_field, Method};
use distham::geometry::{conditions_check, embed, ConstrainedChartPoint};
use distham::hamilton_jacobi::{
    classical_hj_residual, closedness_on_d, gamma_into_m, pullback_residuals, tangent_in_k_residual, type1_residual,
    type2_residual, OneFormSection, PhaseMap,
};
use distham::io::{bundled, load_system, ExprMap, LoadedSystem};
use distham::mechanics::PhasePoint;
use distham::reduction::{momentum_map, pi_relatedness_residual, reduce, CotangentLiftedAction};
use distham::scalar::max_abs;
use distham::{Error, System, Traj};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use report::{Check, Failure};

#[derive(Parser)]
#[command(name = "distham", version, about = "Nonholonomic Hamiltonian systems: simulation and Hamilton–Jacobi checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate X_K from a chart point and write the trajectory as CSV.
    Simulate {
        /// Config file, or the name of a bundled config.
        config: String,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        q: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        u: Vec<f64>,
        /// Final time (defaults to the config's [simulation] value).
        #[arg(long)]
        t: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        method: Option<Method>,
        /// Append momentum-map columns for this action.
        #[arg(long)]
        action: Option<String>,
        /// CSV destination; stdout when omitted.
        #[arg(long)]
        out: Option<String>,
        /// Diagnostics JSON destination; stderr when omitted.
        #[arg(long)]
        report: Option<String>,
    },
    /// Print X_K at a chart point (chart and ambient components).
    Field {
        config: String,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        q: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        u: Vec<f64>,
    },
    /// Evaluate Hamilton–Jacobi residuals of a one-form section at random points.
    CheckHj {
        config: String,
        /// Covector components of γ as expressions in the coordinates.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        gamma: Vec<String>,
        /// Phase map ε as 2n expressions in the coordinates and `p_<coordinate>`.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        eps: Option<Vec<String>>,
        #[arg(long, default_value_t = 50)]
        points: usize,
        /// Half-width of the sampling box for q.
        #[arg(long, default_value_t = 2.0)]
        radius: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Audit a quotient chart and sample its reduced field.
    Reduce {
        config: String,
        #[arg(long)]
        chart: String,
        #[arg(long, default_value_t = 100)]
        points: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Structural checks at a configuration: brackets, D-regularity, admissibility, compatibility.
    Analyze {
        config: String,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        q: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        u: Option<Vec<f64>>,
        #[arg(long, default_value_t = 2)]
        depth: usize,
    },
    /// List bundled configs, or print one.
    Examples {
        #[arg(long)]
        show: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            return Failure::usage(e.to_string().trim()).emit();
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => f.emit(),
    }
}

fn load(config: &str) -> Result<LoadedSystem<f64>, Failure> {
    let loaded = if Path::new(config).exists() {
        load_system(config)
    } else if bundled::source(config).is_some() {
        bundled::load(config)
    } else {
        return Err(Failure::config(format!("{config}: no such file or bundled config")));
    };
    loaded.map_err(Failure::loading)
}

fn chart_point(sys: &System, q: Vec<f64>, u: Vec<f64>) -> Result<ConstrainedChartPoint<f64>, Failure> {
    if q.len() != sys.n() || u.len() != sys.m() {
        return Err(Failure::usage(format!(
            "{} needs {} values for --q and {} for --u",
            sys.name(),
            sys.n(),
            sys.m()
        )));
    }
    Ok(ConstrainedChartPoint::new(q, u))
}

fn print_json(value: &serde_json::Value) -> Result<(), Failure> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value).map_err(Failure::io)?;
    writeln!(out).map_err(Failure::io)
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Simulate {
            config,
            q,
            u,
            t,
            dt,
            method,
            action,
            out,
            report,
        } => {
            let loaded = load(&config)?;
            let sys = &loaded.system;
            let start = chart_point(sys, q, u)?;
            let action = match &action {
                Some(name) => Some(
                    loaded
                        .action(name)
                        .ok_or_else(|| Failure::usage(format!("no action named `{name}`")))?,
                ),
                None => None,
            };
            let sim = loaded.simulation;
            let t_final = t.unwrap_or(sim.t_final);
            let dt = dt.unwrap_or(sim.dt);
            let method = method.unwrap_or(sim.method);
            let (traj, error) = match integrate_with_momentum(sys, &start, t_final, dt, method, action) {
                Ok(traj) => (traj, None),
                Err(f) => (f.partial, Some(f.error)),
            };
            match &out {
                Some(path) => write_csv(File::create(path).map_err(Failure::io)?, sys, &traj, action)?,
                None => write_csv(io::stdout().lock(), sys, &traj, action)?,
            }
            if let Some(e) = error {
                return Err(Failure::from(e));
            }
            let diag = diagnostics(&traj);
            let last = traj.phase.last().expect("trajectory has a first sample");
            let summary = json!({
                "system": sys.name(),
                "method": method.to_string(),
                "t_final": t_final,
                "dt": dt,
                "samples": traj.len(),
                "energy_drift": diag.energy_drift,
                "constraint_max": diag.constraint_max,
                "momentum_drift": diag.momentum_drift,
                "final": { "q": last.q, "p": last.p, "u": traj.last().map(|s| &s.u) },
            });
            match report {
                Some(path) => {
                    let f = File::create(path).map_err(Failure::io)?;
                    serde_json::to_writer_pretty(f, &summary).map_err(Failure::io)?;
                }
                None => eprintln!("{summary}"),
            }
            Ok(())
        }
        Command::Field { config, q, u } => {
            let loaded = load(&config)?;
            let sys = &loaded.system;
            let point = chart_point(sys, q, u)?;
            let field = nonholonomic_field(sys, &point)?;
            let projected = projection_field(sys, &point)?;
            let (n, m) = (sys.n(), sys.m());
            print_json(&json!({
                "system": sys.name(),
                "point": { "q": point.q, "u": point.u, "p": embed(sys, &point)?.p },
                "chart": { "q_dot": &field.chart[..n], "u_dot": &field.chart[n..n + m] },
                "ambient": { "q_dot": field.qdot(), "p_dot": field.pdot() },
                "projection_gap": distham::scalar::distance(&field.ambient, &projected.ambient),
                "omega_k_condition": field.frame.condition(),
            }))
        }
        Command::CheckHj {
            config,
            gamma,
            eps,
            points,
            radius,
            seed,
        } => check_hj(&load(&config)?, &gamma, eps.as_deref(), points, radius, seed),
        Command::Reduce {
            config,
            chart,
            points,
            seed,
        } => {
            let loaded = load(&config)?;
            let sys = &loaded.system;
            let quotient = loaded
                .chart(&chart)
                .cloned()
                .ok_or_else(|| Failure::usage(format!("no chart named `{chart}` in {}", sys.name())))?;
            let red = reduce(sys, quotient)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut pi = Check::new("pi_relatedness", 1e-10);
            let mut samples = Vec::new();
            let mut conflicts = std::collections::BTreeMap::<String, usize>::new();
            for i in 0..points {
                let point = ConstrainedChartPoint::new(uniform(&mut rng, sys.n(), 2.0), uniform(&mut rng, sys.m(), 2.0));
                pi.record(pi_relatedness_residual(&red, &point));
                let xbar = red.project_point(&point)?;
                let found = red.conflicts(&xbar)?;
                for c in &found {
                    *conflicts.entry(c.component.clone()).or_default() += 1;
                }
                if i < 5 {
                    samples.push(json!({
                        "reduced_point": xbar,
                        "reduced_field": red.reduced_field(&xbar)?,
                        "expected": red.expected_field(&xbar).transpose()?,
                        "conflicts": found,
                    }));
                }
            }
            print_json(&json!({
                "system": sys.name(),
                "chart": red.chart.name,
                "reduced_coordinates": red.chart.reduced_names,
                "audit": red.audit,
                "checks": [pi],
                "pass": pi.pass,
                "conflicting_components": conflicts,
                "samples": samples,
            }))
        }
        Command::Analyze { config, q, u, depth } => {
            let loaded = load(&config)?;
            let sys = &loaded.system;
            let u = u.unwrap_or_else(|| vec![0.0; sys.m()]);
            let point = chart_point(sys, q, u)?;
            let fields: Vec<_> = (0..sys.m()).map(|i| sys.d_frame_field(i)).collect();
            let refs: Vec<&dyn SmoothMap<f64>> = fields.iter().map(|f| f as &dyn SmoothMap<f64>).collect();
            let brackets = bracket_generating(&refs, &point.q, depth, 1e-10)?;
            let regularity = sys.d_regularity_measure(&point.q)?;
            let conditions = conditions_check(sys, &point);
            let pass = brackets.generating && sys.d_regularity(&point.q) && conditions.admissible && conditions.compatible;
            print_json(&json!({
                "system": sys.name(),
                "q": point.q,
                "bracket_generating": brackets,
                "d_regularity": { "measure": regularity, "tolerance": 1e-8, "pass": sys.d_regularity(&point.q) },
                "conditions": conditions,
                "pass": pass,
            }))
        }
        Command::Examples { show } => match show {
            Some(name) => {
                let src = bundled::source(&name).ok_or_else(|| Failure::usage(format!("no bundled config `{name}`")))?;
                print!("{src}");
                Ok(())
            }
            None => {
                for name in bundled::NAMES {
                    let src = bundled::source(name).unwrap_or_default();
                    let blurb = src.lines().next().unwrap_or("").trim_start_matches('#').trim();
                    println!("{name}.cfg\t{blurb}");
                }
                Ok(())
            }
        },
    }
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-radius..radius)).collect()
}

fn write_csv<W: Write>(
    sink: W,
    sys: &System,
    traj: &Traj,
    action: Option<&CotangentLiftedAction<f64>>,
) -> Result<(), Failure> {
    let mut w = csv::Writer::from_writer(sink);
    let mut header = vec!["t".to_string()];
    header.extend((1..=sys.n()).map(|i| format!("q{i}")));
    header.extend((1..=sys.m()).map(|i| format!("u{i}")));
    header.extend((1..=sys.n()).map(|i| format!("p{i}")));
    header.push("H".into());
    header.push("constraint_residual".into());
    if let Some(a) = action {
        header.extend((1..=a.dim()).map(|i| format!("J{i}")));
    }
    w.write_record(&header).map_err(Failure::io)?;
    let fmt = |v: f64| format!("{v:.16e}");
    for i in 0..traj.len() {
        let mut row = vec![fmt(traj.times[i])];
        row.extend(traj.states[i].q.iter().map(|&v| fmt(v)));
        row.extend(traj.states[i].u.iter().map(|&v| fmt(v)));
        row.extend(traj.phase[i].p.iter().map(|&v| fmt(v)));
        row.push(fmt(traj.energy[i]));
        row.push(fmt(traj.constraint_residual[i]));
        if let Some(a) = action {
            let j = match &traj.momentum_series {
                Some(series) => series[i].clone(),
                None => momentum_map(a, &traj.phase[i])?,
            };
            row.extend(j.into_iter().map(fmt));
        }
        w.write_record(&row).map_err(Failure::io)?;
    }
    w.flush().map_err(Failure::io)
}

fn check_hj(
    loaded: &LoadedSystem<f64>,
    gamma: &[String],
    eps: Option<&[String]>,
    points: usize,
    radius: f64,
    seed: u64,
) -> Result<(), Failure> {
    let sys = &loaded.system;
    let n = sys.n();
    if gamma.len() != n {
        return Err(Failure::usage(format!("--gamma needs {n} expressions, got {}", gamma.len())));
    }
    let section = OneFormSection::from_ref(Arc::new(
        ExprMap::parse(gamma, &loaded.scope(sys.coordinates().iter().cloned()))?,
    ));
    let phase_map = match eps {
        Some(list) => {
            if list.len() != 2 * n {
                return Err(Failure::usage(format!("--eps needs {} expressions, got {}", 2 * n, list.len())));
            }
            let mut vars: Vec<String> = sys.coordinates().to_vec();
            vars.extend(sys.coordinates().iter().map(|c| format!("p_{c}")));
            Some(PhaseMap::from_ref(Arc::new(ExprMap::parse(list, &loaded.scope(vars))?)))
        }
        None => None,
    };

    let mut closed = Check::new("closedness_on_D", 1e-10);
    let mut member = Check::new("membership", 1e-12);
    let mut tangent = Check::new("tangent_in_K", 1e-8);
    let mut type1 = Check::new("type1", 1e-8);
    let mut type2 = Check::new("type2", 1e-8);
    let mut r_i = Check::new("pullback_i", 1e-9);
    let mut r_ii = Check::new("pullback_ii", 1e-9);
    let mut r_iii = Check::new("pullback_iii", 1e-10);
    let mut classical = Check::new("classical_hj", 1e-8);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..points {
        let q = uniform(&mut rng, n, radius);
        closed.record(closedness_on_d(sys, &section, &q));
        member.record(gamma_into_m(sys, &section, &q).map(|r| max_abs(&r)));
        tangent.record(tangent_in_k_residual(sys, &section, &q));
        type1.record(type1_residual(sys, &section, &q));
        classical.record(classical_hj_residual(sys, &section, &q));
        let point = PhasePoint::new(q.clone(), uniform(&mut rng, n, radius));
        let v = uniform(&mut rng, 2 * n, 1.0);
        let w = uniform(&mut rng, 2 * n, 1.0);
        match pullback_residuals(sys, &section, &point, &v, &w) {
            Ok(l) => {
                r_i.record(Ok(l.r_i));
                r_ii.record(Ok(l.r_ii));
                r_iii.record(Ok(l.r_iii));
            }
            Err(e) => {
                for c in [&mut r_i, &mut r_ii, &mut r_iii] {
                    c.record(Err(e.clone()));
                }
            }
        }
        if let Some(eps) = &phase_map {
            type2.record(section.point(&q).and_then(|pt| type2_residual(sys, &section, eps, &pt)));
        }
    }
    let mut checks = vec![closed, member, tangent, type1];
    if phase_map.is_some() {
        checks.push(type2);
    }
    checks.extend([r_i, r_ii, r_iii]);
    let pass = checks.iter().all(|c| c.pass);
    let report = json!({
        "system": sys.name(),
        "gamma": gamma,
        "eps": eps,
        "points": points,
        "checks": checks,
        "informational": [classical],
        "pass": pass,
        "status": if pass { "PASS" } else { "FAIL" },
    });
    print_json(&report)?;
    if pass {
        Ok(())
    } else {
        let failed: Vec<_> = checks.iter().filter(|c| !c.pass).map(|c| c.check).collect();
        Err(Failure::numerical(format!("checks failed: {}", failed.join(", "))))
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::from_error(e)
    }
}
