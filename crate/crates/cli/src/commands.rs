//! The five commands.

use crate::config::{
    build, BlowupTask, Built, CompareTask, PeriodTask, ProblemConfig, RunConfig, SolveTask, TaskConfig,
};
use crate::error::CliError;
use crate::output::{cols, config_hash, num, Output, Table};
use hodograph_core::blowup::{
    self, certify_branch_absent_diag, certify_no_blowup_1d, sheets_coriolis2d, Absence, BlowupSheet,
    Certificate, MGrid, MinBlowup, RootFamily, SheetEngine, SheetKind, SheetValue,
};
use hodograph_core::degenerate::{degenerate_solve, degenerate_sweep, non_periodicity_witness};
use hodograph_core::oracle::{exact_flow_from, first_fold_time};
use hodograph_core::periodicity::{check_periodic, verify_solution_period, NonPeriodicReason, PeriodPointOutcome};
use hodograph_core::{matops, solve_u, sweep_u, Error, HodographProblem, HodographSolution, Vect};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Blowup,
    Period,
    Compare,
    /// Solve, blowup or compare restricted to the rotating-frame preset.
    Coriolis3d,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Blowup => "blowup",
            Command::Period => "period",
            Command::Compare => "compare",
            Command::Coriolis3d => "coriolis3d",
        }
    }
}

/// Row status in field and comparison tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    /// Solved, but within the configured margin of the blow-up surface.
    NearBlowup,
    /// The first time at which continuation hit the blow-up surface.
    Blowup,
    /// After a blow-up: the solution is multivalued and not reported.
    PostBlowup,
    Fail,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Ok => "OK",
            Status::NearBlowup => "NEAR_BLOWUP",
            Status::Blowup => "BLOWUP",
            Status::PostBlowup => "POST_BLOWUP",
            Status::Fail => "FAIL",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Status::Ok, Status::NearBlowup, Status::Blowup, Status::PostBlowup, Status::Fail]
            .into_iter()
            .find(|st| st.as_str() == s)
    }
}

/// Output of a command and, for comparisons, the gate verdict.
#[derive(Debug)]
pub struct Outcome {
    pub output: Output,
    pub gate: Option<CliError>,
}

fn header_comments(cmd: Command, cfg: &RunConfig) -> Vec<String> {
    vec![
        format!("hodograph {}", cmd.name()),
        format!("config-sha256 {}", config_hash(&cfg.to_toml())),
    ]
}

/// Runs `cmd` on a validated config.
pub fn run(cmd: Command, cfg: &RunConfig) -> Result<Outcome, CliError> {
    cfg.validate()?;
    let task = cfg.task.name();
    match cmd {
        Command::Coriolis3d => {
            if !matches!(cfg.problem, ProblemConfig::Coriolis3d { .. }) {
                return Err(CliError::Config("coriolis3d needs problem preset \"coriolis3d\"".into()));
            }
            if matches!(cfg.task, TaskConfig::Period(_)) {
                return Err(CliError::Config("coriolis3d runs solve, blowup or compare tasks".into()));
            }
        }
        _ if cmd.name() != task => {
            return Err(CliError::Config(format!("command {} got a {task} task", cmd.name())));
        }
        _ => {}
    }
    let built = build(cfg)?;
    let mut comments = header_comments(cmd, cfg);
    let outcome = match &cfg.task {
        TaskConfig::Solve(t) => Outcome {
            output: Output::Csv(solve_table(&built, t)?),
            gate: None,
        },
        TaskConfig::Blowup(t) => Outcome {
            output: Output::Csv(blowup_table(&built, t)?),
            gate: None,
        },
        TaskConfig::Period(t) => Outcome {
            output: Output::Text(period_report(&built, t)?),
            gate: None,
        },
        TaskConfig::Compare(t) => {
            let (table, gate) = compare_table(&built, t)?;
            Outcome {
                output: Output::Csv(table),
                gate,
            }
        }
    };
    Ok(match outcome.output {
        Output::Csv(mut t) => {
            comments.append(&mut t.comments);
            t.comments = comments;
            Outcome {
                output: Output::Csv(t),
                gate: outcome.gate,
            }
        }
        Output::Text(s) => {
            let mut text: String = comments.iter().map(|c| format!("# {c}\n")).collect();
            text.push_str(&s);
            Outcome {
                output: Output::Text(text),
                gate: outcome.gate,
            }
        }
    })
}

/// Inclusive tensor grid, last coordinate fastest.
fn x_grid(lo: &[f64], hi: &[f64], points: usize) -> Vec<Vect> {
    let n = lo.len();
    let axis = |i: usize| -> Vec<f64> {
        if points == 1 {
            return vec![lo[i]];
        }
        (0..points)
            .map(|k| lo[i] + (hi[i] - lo[i]) * k as f64 / (points - 1) as f64)
            .collect()
    };
    let mut out = vec![Vect::zeros(n)];
    for i in 0..n {
        let ax = axis(i);
        out = out
            .iter()
            .flat_map(|p| {
                ax.iter().map(move |&v| {
                    let mut q = p.clone();
                    q[i] = v;
                    q
                })
            })
            .collect();
    }
    out
}

fn sweep(built: &Built, x: &Vect, times: &[f64]) -> Vec<hodograph_core::Result<HodographSolution>> {
    match &built.basis {
        Some(b) => degenerate_sweep(&built.problem, b, x, times),
        None => sweep_u(&built.problem, x, times),
    }
}

fn solve_at(built: &Built, t: f64, x: &Vect) -> hodograph_core::Result<HodographSolution> {
    match &built.basis {
        Some(b) => degenerate_solve(&built.problem, b, t, x, None),
        None => solve_u(&built.problem, t, x, None),
    }
}

/// `|det(φ1 + J)| / |det J|` at the root, which is 1 at t = 0 and 0 on Γ.
fn gamma_ratio(problem: &HodographProblem, sol: &HodographSolution) -> f64 {
    let at = blowup::blowup_residual(problem, sol.sample.t, &sol.m);
    let base = blowup::blowup_residual(problem, 0.0, &sol.m);
    match (at, base) {
        (Ok(a), Ok(b)) if b != 0.0 => (a / b).abs(),
        _ => f64::NAN,
    }
}

/// Classifies a sweep: the first failure in each time direction is BLOWUP when
/// the blow-up surface was hit and FAIL otherwise; later times inherit it.
/// Forward times past `t_crit` are POST_BLOWUP regardless, since continuation
/// at fixed x may follow one sheet of a multivalued solution.
fn classify(
    problem: &HodographProblem,
    times: &[f64],
    results: &[hodograph_core::Result<HodographSolution>],
    near: f64,
    t_crit: f64,
) -> Vec<Status> {
    let mut status = vec![Status::Ok; times.len()];
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].abs().partial_cmp(&times[b].abs()).unwrap());
    let mut failed = [None::<Status>, None::<Status>];
    for i in order {
        let dir = usize::from(times[i] < 0.0);
        if times[i] > t_crit * (1.0 + 1e-9) {
            status[i] = Status::PostBlowup;
            continue;
        }
        status[i] = match (&results[i], failed[dir]) {
            (_, Some(Status::Blowup)) => Status::PostBlowup,
            (_, Some(_)) => Status::Fail,
            (Ok(sol), None) => {
                if gamma_ratio(problem, sol) < near {
                    Status::NearBlowup
                } else {
                    Status::Ok
                }
            }
            (Err(e), None) => {
                let s = if matches!(e, Error::JacobianSingular { .. }) {
                    Status::Blowup
                } else {
                    Status::Fail
                };
                failed[dir] = Some(s);
                s
            }
        };
    }
    status
}

fn solve_table(built: &Built, task: &SolveTask) -> Result<Table, CliError> {
    let n = built.problem.dim();
    let xs = x_grid(&task.x_min, &task.x_max, task.points);
    let t_last = task.times.iter().cloned().fold(0.0, f64::max);
    let t_crit = if t_last > 0.0 {
        first_blowup(&built.problem, task.grid, t_last, &xs)?
    } else {
        f64::INFINITY
    };
    let per_x: Vec<(Vec<hodograph_core::Result<HodographSolution>>, Vec<Status>)> = xs
        .par_iter()
        .map(|x| {
            let res = sweep(built, x, &task.times);
            let st = classify(&built.problem, &task.times, &res, task.near_blowup, t_crit);
            (res, st)
        })
        .collect();
    let mut header = vec!["t".to_string()];
    header.extend(cols("x", n));
    header.extend(cols("u", n));
    header.extend(["newton_iters".to_string(), "status".to_string()]);
    let mut table = Table::new(header);
    table.comments.push(format!("t_first_blowup {}", num(t_crit)));
    for (ti, &t) in task.times.iter().enumerate() {
        for (x, (res, st)) in xs.iter().zip(&per_x) {
            let mut row = vec![num(t)];
            row.extend(x.iter().map(|&v| num(v)));
            match (&res[ti], st[ti]) {
                (Ok(sol), Status::Ok | Status::NearBlowup) => {
                    row.extend(sol.sample.u.iter().map(|&v| num(v)));
                    row.push(sol.iterations.to_string());
                }
                _ => {
                    row.extend(std::iter::repeat_n(String::new(), n + 1));
                }
            }
            row.push(st[ti].as_str().to_string());
            table.rows.push(row);
        }
    }
    Ok(table)
}

pub fn sheet_label(kind: SheetKind) -> String {
    match kind {
        SheetKind::OneD => "oned".into(),
        SheetKind::Diag { index } => format!("diag{index}"),
        SheetKind::Coriolis { family, k } => {
            let f = match family {
                RootFamily::Plus => "plus",
                RootFamily::Minus => "minus",
            };
            format!("coriolis_{f}_k{k}")
        }
        SheetKind::Diag2 { index } => format!("diag2_{index}"),
        SheetKind::Scan { index } => format!("scan{index}"),
    }
}

fn absence_label(a: &Absence) -> &'static str {
    match a {
        Absence::LogArgument { .. } => "ABSENT_LOG_ARGUMENT",
        Absence::NoRealRoot => "ABSENT_NO_REAL_ROOT",
        Absence::NoRootInWindow => "ABSENT_NO_ROOT_IN_WINDOW",
    }
}

fn vec_text(v: &Vect) -> String {
    let parts: Vec<String> = v.iter().map(|&x| num(x)).collect();
    format!("[{}]", parts.join(" "))
}

fn certificates(problem: &HodographProblem) -> Result<Vec<String>, CliError> {
    let describe = |c: Certificate| match c {
        Certificate::Certified { margin, at } => format!("CERTIFIED margin={} at={}", num(margin), vec_text(&at)),
        Certificate::NotCertified { worst, value } => {
            format!("NOT_CERTIFIED value={} at={}", num(value), vec_text(&worst))
        }
    };
    if problem.dim() == 1 {
        return Ok(vec![format!("certificate {}", describe(certify_no_blowup_1d(problem)?))]);
    }
    if problem.spec().scalar_multiple_of_identity().is_some() {
        let free = problem.data().free_indices().len();
        return (0..free)
            .map(|i| Ok(format!("certificate diag{i} {}", describe(certify_branch_absent_diag(problem, i)?))))
            .collect();
    }
    Ok(vec!["certificate NOT_APPLICABLE".into()])
}

fn sheets_for(problem: &HodographProblem, task: &BlowupTask) -> Result<Vec<BlowupSheet>, CliError> {
    let grid = MGrid::for_problem(problem);
    Ok(match SheetEngine::for_problem(problem) {
        SheetEngine::Coriolis { .. } => sheets_coriolis2d(problem, &grid, task.k_min..=task.k_max)?,
        _ => blowup::auto_sheets(problem)?,
    })
}

fn blowup_table(built: &Built, task: &BlowupTask) -> Result<Table, CliError> {
    let problem = built.problem.clone().with_grid(task.grid)?;
    let n = problem.dim();
    let sheets = sheets_for(&problem, task)?;
    let mut comments = Vec::new();
    match blowup::min_blowup_time(&problem, &sheets)? {
        MinBlowup::Found(p) => {
            comments.push(format!("t_star {}", num(p.t)));
            comments.push(format!("m_star {}", vec_text(&p.m)));
            comments.push(format!("x_star {}", vec_text(&p.x)));
            comments.push(format!("u_star {}", vec_text(&p.u)));
            comments.push(format!("sheet_star {}", sheet_label(p.sheet)));
        }
        MinBlowup::NoBlowup => comments.push("t_star none".into()),
    }
    for s in &sheets {
        for ext in s.min.iter().chain(s.max.iter()) {
            comments.push(format!(
                "extremum {} {:?} t={} m={} boundary={}",
                sheet_label(s.kind),
                ext.kind,
                num(ext.t),
                vec_text(&ext.m),
                ext.on_boundary
            ));
        }
    }
    comments.extend(certificates(&problem)?);
    let mut header = vec!["sheet".to_string()];
    header.extend(cols("m", n));
    header.extend(["t".to_string(), "status".to_string()]);
    let mut table = Table::new(header);
    table.comments = comments;
    for s in &sheets {
        for sample in &s.samples {
            let mut row = vec![sheet_label(s.kind)];
            row.extend(sample.m.iter().map(|&v| num(v)));
            match &sample.value {
                SheetValue::Time(t) => row.extend([num(*t), "TIME".into()]),
                SheetValue::Absent(a) => row.extend([String::new(), absence_label(a).into()]),
            }
            table.rows.push(row);
        }
    }
    Ok(table)
}

fn reason_text(r: &NonPeriodicReason) -> String {
    match r {
        NonPeriodicReason::NonFinite => "non-finite matrix".into(),
        NonPeriodicReason::RealPart { eigenvalue } => {
            format!("real eigenvalues (eigenvalue {} with nonzero real part)", complex_text(*eigenvalue))
        }
        NonPeriodicReason::ZeroEigenvalue => "zero eigenvalue (det A = 0)".into(),
        NonPeriodicReason::NotDiagonalizable => "not diagonalizable".into(),
        NonPeriodicReason::IrrationalRatio { ratio } => format!("irrational frequency ratio {}", num(*ratio)),
        NonPeriodicReason::VerificationFailed { period, residual } => {
            format!("candidate period {} fails with residual {}", num(*period), num(*residual))
        }
    }
}

fn complex_text(z: matops::Complex<f64>) -> String {
    format!("{}{:+}i", num(z.re), z.im)
}

fn random_samples(
    problem: &HodographProblem,
    n: usize,
    t_max: f64,
    seed: u64,
    x_box: (&Option<Vec<f64>>, &Option<Vec<f64>>),
) -> Vec<(f64, Vect)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = match x_box {
        (Some(l), Some(h)) => (Vect::from_column_slice(l), Vect::from_column_slice(h)),
        _ => problem.data().x_box(),
    };
    (0..n)
        .map(|_| {
            let t = rng.random_range(0.0..=t_max);
            let x = Vect::from_fn(lo.len(), |i, _| rng.random_range(lo[i]..=hi[i]));
            (t, x)
        })
        .collect()
}

fn period_report(built: &Built, task: &PeriodTask) -> Result<String, CliError> {
    let problem = &built.problem;
    let a = problem.spec().a();
    let rep = check_periodic(a, task.rational_tol, task.max_denominator)?;
    let mut s = String::new();
    let ev: Vec<String> = rep.eigenvalues.iter().map(|z| complex_text(*z)).collect();
    writeln!(s, "eigenvalues: {}", ev.join(", ")).unwrap();
    writeln!(s, "periodic: {}", rep.periodic).unwrap();
    if let Some(l) = rep.base_rate {
        writeln!(s, "base_rate: {}", num(l)).unwrap();
    }
    if !rep.multipliers.is_empty() {
        let m: Vec<String> = rep.multipliers.iter().map(|(p, q)| format!("{p}/{q}")).collect();
        writeln!(s, "multipliers: {}", m.join(", ")).unwrap();
    }
    if let Some(t) = rep.period {
        let res = matops::max_abs(&(matops::mat_exp(a, t)? - hodograph_core::Mat::identity(a.nrows(), a.ncols())));
        writeln!(s, "period: {}", num(t)).unwrap();
        writeln!(s, "exp_period_residual: {}", num(res)).unwrap();
    }
    if let Some(r) = &rep.reason {
        writeln!(s, "reason: {}", reason_text(r)).unwrap();
    }
    let Some(v) = &task.verify else {
        return Ok(s);
    };
    let Some(period) = v.period.or(rep.period) else {
        writeln!(s, "verify: skipped (no period)").unwrap();
        return Ok(s);
    };
    let samples = random_samples(problem, v.points, v.t_max, v.seed, (&v.x_min, &v.x_max));
    match &built.basis {
        None => {
            let ver = verify_solution_period(problem, period, &samples, v.tol)?;
            let blowups = ver
                .points
                .iter()
                .filter(|p| matches!(p, PeriodPointOutcome::BlowupOnPath { .. }))
                .count();
            writeln!(
                s,
                "verify: {} (period {}, {} points, max difference {}, {} blow-ups on path)",
                if ver.passed() { "passed" } else { "failed" },
                num(period),
                ver.points.len(),
                ver.max_difference().map_or_else(|| "none".into(), num),
                blowups
            )
            .unwrap();
        }
        Some(b) => match non_periodicity_witness(problem, b, period, &samples)? {
            Some(w) => writeln!(
                s,
                "witness: t={} x={} difference={}",
                num(w.t),
                vec_text(&w.x),
                num(w.difference)
            )
            .unwrap(),
            None => writeln!(s, "witness: none (period {})", num(period)).unwrap(),
        },
    }
    Ok(s)
}

/// Fraction of the first blow-up time past which rows are NEAR_BLOWUP.
const NEAR_FRACTION: f64 = 0.99;
/// Time step of the flow-Jacobian scan for fold times.
const FOLD_DT: f64 = 1e-3;

/// Earliest blow-up time of the problem up to `t_max`: from the sheets when a
/// closed form exists, otherwise the first fold over a probe grid of
/// characteristics (including the sample points).
fn first_blowup(problem: &HodographProblem, grid: usize, t_max: f64, extra: &[Vect]) -> Result<f64, CliError> {
    let engine = SheetEngine::for_problem(problem);
    if !matches!(engine, SheetEngine::Scan { .. }) {
        let p = problem.clone().with_grid(grid)?;
        let sheets = blowup::auto_sheets(&p)?;
        return Ok(match blowup::min_blowup_time(&p, &sheets)? {
            MinBlowup::Found(b) => b.t,
            MinBlowup::NoBlowup => f64::INFINITY,
        });
    }
    let (lo, hi) = problem.data().x_box();
    let per_dim = match problem.dim() {
        1 => 101,
        2 => 21,
        _ => 9,
    };
    let mut probes = x_grid(lo.as_slice(), hi.as_slice(), per_dim);
    probes.extend_from_slice(extra);
    let folds: Vec<f64> = probes
        .par_iter()
        .map(|x0| {
            first_fold_time(problem.spec(), problem.data(), x0, t_max, FOLD_DT)
                .ok()
                .flatten()
                .unwrap_or(f64::INFINITY)
        })
        .collect();
    Ok(folds.into_iter().fold(f64::INFINITY, f64::min))
}

fn compare_table(built: &Built, task: &CompareTask) -> Result<(Table, Option<CliError>), CliError> {
    let problem = &built.problem;
    let n = problem.dim();
    let samples = random_samples(problem, task.samples, task.t_max, task.seed, (&task.x_min, &task.x_max));
    let x0s: Vec<Vect> = samples.iter().map(|(_, x)| x.clone()).collect();
    let t_crit = first_blowup(problem, task.grid, task.t_max, &x0s)?;

    struct Row {
        x: Vect,
        u: Option<Vect>,
        u_exact: Vect,
        error: f64,
        status: Status,
    }
    let rows: Vec<Result<Row, CliError>> = samples
        .par_iter()
        .map(|(t, x0)| {
            let flow = exact_flow_from(problem.spec(), problem.data(), x0, *t)?;
            if *t >= t_crit {
                return Ok(Row {
                    x: flow.x,
                    u: None,
                    u_exact: flow.u,
                    error: f64::NAN,
                    status: Status::PostBlowup,
                });
            }
            Ok(match solve_at(built, *t, &flow.x) {
                Ok(sol) => {
                    let error = (&sol.sample.u - &flow.u).amax();
                    let status = if *t >= NEAR_FRACTION * t_crit {
                        Status::NearBlowup
                    } else {
                        Status::Ok
                    };
                    Row {
                        x: flow.x,
                        u: Some(sol.sample.u),
                        u_exact: flow.u,
                        error,
                        status,
                    }
                }
                Err(_) => Row {
                    x: flow.x,
                    u: None,
                    u_exact: flow.u,
                    error: f64::NAN,
                    status: Status::Fail,
                },
            })
        })
        .collect();

    let mut header = vec!["sample".to_string(), "t".to_string()];
    header.extend(cols("x0_", n));
    header.extend(cols("x", n));
    header.extend(cols("u", n));
    header.extend(cols("u_exact", n));
    header.extend(["error".to_string(), "status".to_string()]);
    let mut table = Table::new(header);
    let (mut max_error, mut failures) = (0.0_f64, 0usize);
    for (i, ((t, x0), row)) in samples.iter().zip(rows).enumerate() {
        let row = row?;
        match row.status {
            Status::Fail => failures += 1,
            Status::Ok | Status::NearBlowup => {
                max_error = max_error.max(row.error);
                if !(row.error <= task.tol) {
                    failures += 1;
                }
            }
            _ => {}
        }
        let mut r = vec![i.to_string(), num(*t)];
        r.extend(x0.iter().map(|&v| num(v)));
        r.extend(row.x.iter().map(|&v| num(v)));
        match &row.u {
            Some(u) => r.extend(u.iter().map(|&v| num(v))),
            None => r.extend(std::iter::repeat_n(String::new(), n)),
        }
        r.extend(row.u_exact.iter().map(|&v| num(v)));
        r.extend([num(row.error), row.status.as_str().to_string()]);
        table.rows.push(r);
    }
    table.comments.push(format!("t_first_blowup {}", num(t_crit)));
    table.comments.push(format!("max_error {} tol {} failures {}", num(max_error), num(task.tol), failures));
    let gate = (failures > 0).then_some(CliError::Gate {
        max_error,
        tol: task.tol,
        failures,
    });
    Ok((table, gate))
}
