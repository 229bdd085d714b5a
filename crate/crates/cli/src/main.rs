mod literal;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use shorcert::exactness::{
    check_burer_ye_diag, check_ch_general_pointwise, check_ch_polyhedral, check_obj_strong,
    check_obj_weak, check_qmp_bounds, ExactnessReport,
};
use shorcert::gamma::prepare_gamma;
use shorcert::oracles::compare_opt_at;
use shorcert::ratio::{solve_ratio, RatioProblem};
use shorcert::rog::{
    analyze_set, check_pair_seeded, construct_rank2_witness_3d, construct_rank2_witness_3d_from,
    probe_random_objectives, verify_certificate, LmiSet, RogVerdict,
};
use shorcert::solver::{relaxation_point, shor_program, solve, SolveStatus, DEFAULT_MAX_ITER};
use shorcert::{gallery, Error, QcqpInstance, Sense};

use literal::{parse_matrix, parse_vector};

#[derive(Parser)]
#[command(
    name = "shorcert",
    version,
    about = "Exactness certificates for Shor relaxations of QCQPs"
)]
struct Cli {
    /// Solver tolerance.
    #[arg(long, global = true, default_value_t = 1e-7)]
    tol: f64,
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write the machine-readable report here (a directory for `examples run --all`).
    #[arg(long, global = true)]
    json: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the Shor relaxation of an instance.
    Solve { instance: PathBuf },
    /// Run an exactness check.
    #[command(subcommand)]
    Check(CheckCmd),
    /// Rank-one generation analysis.
    #[command(subcommand)]
    Rog(RogCmd),
    /// Minimize a ratio of quadratic forms.
    Ratio { problem: PathBuf },
    /// Brute-force reference values.
    #[command(subcommand)]
    Oracle(OracleCmd),
    /// Bundled examples.
    #[command(subcommand)]
    Examples(ExamplesCmd),
}

#[derive(Subcommand)]
enum CheckCmd {
    /// Strong form of the objective value exactness condition.
    ObjStrong { instance: PathBuf },
    /// Weak form of the objective value exactness condition.
    ObjWeak { instance: PathBuf },
    /// Convex hull exactness of the projected relaxation.
    Ch { instance: PathBuf },
    /// Sufficient condition for diagonal instances with sign-fixed linear terms.
    BurerYe { instance: PathBuf },
    /// Symmetry bounds for quadratic matrix programs.
    Qmp { instance: PathBuf },
    /// Pointwise convex hull check at `(x, t)`.
    ChPoint {
        instance: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        x: String,
        #[arg(long, allow_hyphen_values = true)]
        t: f64,
    },
}

#[derive(Subcommand)]
enum RogCmd {
    /// Classify a pair given as two matrix literals, a set file or an instance file.
    Pair {
        #[arg(num_args = 1..=2)]
        inputs: Vec<String>,
    },
    /// Rank-two extreme-ray witness for a 3x3 pair.
    Witness3d {
        m1: String,
        m2: String,
        /// Fixed first factor `w`.
        #[arg(long, allow_hyphen_values = true)]
        w: Option<String>,
    },
    /// Compare relaxation and rank-one minima on random objectives.
    Probe {
        #[arg(required = true)]
        matrices: Vec<String>,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        /// Treat the members as equalities.
        #[arg(long)]
        eq: bool,
    },
}

#[derive(Subcommand)]
enum OracleCmd {
    Compare {
        instance: PathBuf,
        #[arg(long, default_value_t = 0.01)]
        res: f64,
    },
}

#[derive(Subcommand)]
enum ExamplesCmd {
    List,
    Run {
        name: Option<String>,
        #[arg(long)]
        all: bool,
    },
}

/// Command failures mapped onto exit codes.
enum Failure {
    Input(String),
    Solver(String),
    Verification(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NonConvergence(_) => Failure::Solver(e.to_string()),
            Error::Verification(_) | Error::Construction(_) | Error::Decomposition(_) => {
                Failure::Verification(e.to_string())
            }
            _ => Failure::Input(e.to_string()),
        }
    }
}

type CmdResult = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (code, msg) = match f {
                Failure::Input(m) => (2, m),
                Failure::Solver(m) => (3, m),
                Failure::Verification(m) => (4, m),
            };
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

fn run(cli: &Cli) -> CmdResult {
    match &cli.command {
        Command::Solve { instance } => cmd_solve(cli, &load_instance(instance)?),
        Command::Check(c) => cmd_check(cli, c),
        Command::Rog(r) => cmd_rog(cli, r),
        Command::Ratio { problem } => cmd_ratio(cli, problem),
        Command::Oracle(OracleCmd::Compare { instance, res }) => {
            let rep = compare_opt_at(&load_instance(instance)?, *res)?;
            println!("grid optimum        {:.6}", rep.opt_grid);
            println!("relaxation optimum  {:.6}", rep.opt_sdp);
            println!("gap                 {:.3e}", rep.gap);
            println!(
                "exactness flag      {} (one-sided evidence)",
                rep.exactness_flag
            );
            emit(cli, &rep)
        }
        Command::Examples(e) => cmd_examples(cli, e),
    }
}

fn read(path: &Path) -> std::result::Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn load_instance(path: &Path) -> std::result::Result<QcqpInstance, Failure> {
    Ok(QcqpInstance::from_json_str(&read(path)?)?)
}

/// Writes the report to `--json` through a temporary file and a rename.
fn write_json<T: Serialize>(path: &Path, report: &T) -> CmdResult {
    let text = serde_json::to_string_pretty(report).map_err(|e| Failure::Input(e.to_string()))?;
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, text + "\n")
        .map_err(|e| Failure::Input(format!("{}: {e}", tmp.display())))?;
    std::fs::rename(&tmp, path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

/// Serialized name of a unit enum variant.
fn label<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(Value::String(s)) => s,
        Ok(other) => other.to_string(),
        Err(_) => String::new(),
    }
}

fn emit<T: Serialize>(cli: &Cli, report: &T) -> CmdResult {
    match &cli.json {
        Some(p) => write_json(p, report),
        None => Ok(()),
    }
}

fn cmd_solve(cli: &Cli, inst: &QcqpInstance) -> CmdResult {
    let sol = solve(&shor_program(inst), cli.tol, DEFAULT_MAX_ITER)?;
    let x = relaxation_point(&sol.z);
    println!("status      {}", label(&sol.status));
    println!("Opt_SDP     {:.8}", sol.objective_value);
    println!("x           {:?}", x.as_slice());
    println!("iterations  {}", sol.iterations);
    emit(cli, &json!({"solution": sol, "x": x.as_slice()}))?;
    if sol.status != SolveStatus::Optimal {
        return Err(Failure::Solver(format!(
            "solver stopped with {}",
            label(&sol.status)
        )));
    }
    Ok(())
}

fn print_exactness(r: &ExactnessReport) {
    println!("{}: {}", label(&r.condition), label(&r.verdict));
    if let Some(e) = &r.explanation {
        println!("  {e}");
    }
    for f in &r.faces {
        let subject = match (f.face_id, f.coordinate) {
            (Some(id), _) => format!("face {id} generators {:?}", f.generator_ids),
            (_, Some(j)) => format!("coordinate {j}"),
            _ => String::new(),
        };
        print!("  {subject}: {}", label(&f.sub_verdict));
        if let Some(w) = &f.witness {
            print!(" witness {w:?}");
        }
        if let Some(m) = &f.multiplier {
            print!(" multiplier {m:?}");
        }
        println!();
    }
}

fn cmd_check(cli: &Cli, c: &CheckCmd) -> CmdResult {
    let report = match c {
        CheckCmd::ObjStrong { instance } => check_obj_strong(&load_instance(instance)?),
        CheckCmd::ObjWeak { instance } => check_obj_weak(&load_instance(instance)?),
        CheckCmd::Ch { instance } => check_ch_polyhedral(&load_instance(instance)?),
        CheckCmd::BurerYe { instance } => check_burer_ye_diag(&load_instance(instance)?),
        CheckCmd::Qmp { instance } => {
            let inst = load_instance(instance)?;
            let polyhedral = prepare_gamma(&inst).ok().flatten().is_some();
            check_qmp_bounds(&inst, polyhedral)
        }
        CheckCmd::ChPoint { instance, x, t } => {
            let inst = load_instance(instance)?;
            let rep = check_ch_general_pointwise(&inst, &parse_vector(x)?, *t)?;
            println!("verdict            {}", label(&rep.verdict));
            println!("tight generators   {:?}", rep.tight_generators);
            println!("dim V(F)           {}", rep.vf_dim);
            if let (Some(xp), Some(tp)) = (&rep.x_prime, rep.t_prime) {
                println!("witness (x', t')   {xp:?}, {tp}");
            }
            return emit(cli, &rep);
        }
    };
    print_exactness(&report);
    emit(cli, &report)
}

/// Re-verifies every certificate and fails with exit code 4 otherwise.
fn verified(v: &RogVerdict, mats: &[shorcert::SymMatrix]) -> CmdResult {
    for c in &v.certificates {
        let chk = verify_certificate(c, mats);
        if !chk.ok {
            return Err(Failure::Verification(format!(
                "{} certificate rejected: {}",
                c.kind(),
                chk.detail
            )));
        }
    }
    Ok(())
}

fn print_verdict(v: &RogVerdict) {
    println!("status        {}", label(&v.status));
    println!("certificates  {:?}", v.certificate_kinds());
    if let Some(s) = v.span_dim {
        println!("span dim      {s}");
    }
    for d in &v.diagnostics {
        println!("note          {d}");
    }
}

fn load_set(path: &Path) -> std::result::Result<LmiSet, Failure> {
    let v: Value = serde_json::from_str(&read(path)?)
        .map_err(|e| Failure::Input(format!("invalid JSON: {e}")))?;
    if v.get("dim").is_some() {
        Ok(LmiSet::from_json_value(&v)?)
    } else {
        Ok(LmiSet::from_instance(&QcqpInstance::from_json_value(&v)?))
    }
}

fn cmd_rog(cli: &Cli, r: &RogCmd) -> CmdResult {
    match r {
        RogCmd::Pair { inputs } => {
            let (verdict, mats) = if inputs.len() == 2 {
                let (m1, m2) = (parse_matrix(&inputs[0])?, parse_matrix(&inputs[1])?);
                (check_pair_seeded(&m1, &m2, cli.seed)?, vec![m1, m2])
            } else {
                let set = load_set(Path::new(&inputs[0]))?;
                let v = if set.len() == 2 {
                    check_pair_seeded(&set.matrices[0], &set.matrices[1], cli.seed)?
                } else {
                    analyze_set(&set, cli.seed)?
                };
                let mats = if set.len() == 2 {
                    set.matrices.clone()
                } else {
                    set.expanded()
                };
                (v, mats)
            };
            print_verdict(&verdict);
            emit(cli, &verdict)?;
            verified(&verdict, &mats)
        }
        RogCmd::Witness3d { m1, m2, w } => {
            let (m1, m2) = (parse_matrix(m1)?, parse_matrix(m2)?);
            let wit = match w {
                Some(w) => construct_rank2_witness_3d_from(&m1, &m2, &parse_vector(w)?, cli.seed)?,
                None => construct_rank2_witness_3d(&m1, &m2, cli.seed)?,
            };
            println!("valid        {}", wit.check.valid);
            println!("w            {:?}", wit.w);
            println!("u            {:?}", wit.u);
            println!("rank         {}", wit.check.rank);
            println!("resultant    {:.6e}", wit.check.resultant);
            println!("lines        {:?}", wit.lines);
            emit(cli, &wit)?;
            if !wit.check.valid {
                return Err(Failure::Verification("witness failed verification".into()));
            }
            Ok(())
        }
        RogCmd::Probe {
            matrices,
            trials,
            eq,
        } => {
            let mats: Vec<_> = matrices
                .iter()
                .map(|m| parse_matrix(m))
                .collect::<shorcert::Result<_>>()?;
            let d = mats[0].dim();
            let sense = if *eq { Sense::Eq } else { Sense::Le };
            let set = LmiSet::new(mats.clone(), vec![sense; mats.len()])?;
            let rep = probe_random_objectives(&set, d, *trials, cli.seed)?;
            println!("trials          {}", rep.trials.len());
            println!("max gap         {:.3e}", rep.max_gap);
            println!("not-ROG evidence {}", rep.not_rog_evidence);
            println!("trivial cone    {}", rep.trivial_cone);
            emit(cli, &rep)
        }
    }
}

fn cmd_ratio(cli: &Cli, path: &Path) -> CmdResult {
    let p = RatioProblem::from_json_str(&read(path)?)?;
    let r = solve_ratio(&p, cli.seed)?;
    println!("value        {:.8}", r.value);
    println!("claim        {}", label(&r.claim));
    println!("sigma2/sigma1 {:.3e}", r.sigma_ratio);
    if let Some(z) = &r.candidate {
        println!("candidate    {z:?}");
    }
    println!(
        "hypotheses   rog {}, aggregation {}, closure {} ({})",
        label(&r.hypotheses.rog),
        r.hypotheses.aggregation.holds,
        r.hypotheses.closure.passes,
        r.hypotheses.closure.status
    );
    emit(cli, &r)
}

fn print_run(run: &gallery::GalleryRun) {
    println!("{} [{}] {}", run.name, run.kind, run.description);
    for e in &run.expectations {
        println!(
            "  {:<14} expected {} got {} {}",
            e.key,
            e.expected,
            e.actual,
            if e.ok { "ok" } else { "MISMATCH" }
        );
    }
}

fn cmd_examples(cli: &Cli, e: &ExamplesCmd) -> CmdResult {
    match e {
        ExamplesCmd::List => {
            for n in gallery::names() {
                println!("{n:<20} {}", gallery::description(n).unwrap_or_default());
            }
            Ok(())
        }
        ExamplesCmd::Run { name, all } => {
            let names: Vec<String> = match (name, all) {
                (_, true) => gallery::names().into_iter().map(String::from).collect(),
                (Some(n), false) => vec![n.clone()],
                (None, false) => {
                    return Err(Failure::Input("give an example name or --all".into()))
                }
            };
            if *all {
                if let Some(dir) = &cli.json {
                    std::fs::create_dir_all(dir)
                        .map_err(|e| Failure::Input(format!("{}: {e}", dir.display())))?;
                }
            }
            let mut mismatched = Vec::new();
            for n in &names {
                let run = gallery::run(n, cli.seed)?;
                print_run(&run);
                match (&cli.json, all) {
                    (Some(dir), true) => write_json(&dir.join(format!("{n}.json")), &run)?,
                    (Some(p), false) => write_json(p, &run)?,
                    _ => {}
                }
                if !run.all_ok() {
                    mismatched.push(n.clone());
                }
            }
            if mismatched.is_empty() {
                Ok(())
            } else {
                Err(Failure::Verification(format!(
                    "expectations not met: {}",
                    mismatched.join(", ")
                )))
            }
        }
    }
}
