use absslice::absint::{infer_invariants, render_invariants, uniform_map, AbsState};
use absslice::agreements::{parse_agreement_for, Mode, Predicate, Prover};
use absslice::concrete::{parse_memory, run, trajectory_to_string, Status, DEFAULT_STEP_LIMIT};
use absslice::criteria::{criterion_subsumes, equivalent, parse_criterion, Criterion};
use absslice::deps::{atom_dep, edep, edep_postcondition, find_ndeps, ndep_witness, sem_dep_witness};
use absslice::domains::{Library, DEFAULT_BOUND};
use absslice::lang::{parse_expr, parse_program, Program};
use absslice::pdg::{build_pdg, build_semantic_pdg, EdgeKind, FlowKind, Node};
use absslice::slicer::{abstract_slice, concrete_slice, verify_slice, SliceError, SliceOptions};
use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "absslice", version, about = "Concrete and abstract program slicing")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Integers are enumerated in [-B, B].
    #[arg(long, global = true, default_value_t = DEFAULT_BOUND)]
    bound: i64,
    #[arg(long, global = true, default_value_t = DEFAULT_STEP_LIMIT)]
    step_limit: usize,
}

#[derive(Subcommand)]
enum Cmd {
    /// Execute a program and print its trajectory.
    Run {
        program: PathBuf,
        /// Initial memory, e.g. "n=3, x=obj:List{val=1, next=null}".
        #[arg(long, default_value = "")]
        input: String,
    },
    /// Print abstract invariants before every line.
    Absint {
        program: PathBuf,
        #[arg(long, default_value = "par")]
        domain: String,
    },
    /// Dependencies of an expression's abstract property on its variables.
    Deps {
        #[arg(long)]
        expr: String,
        #[arg(long, default_value = "par")]
        domain: String,
        /// Also test this single variable with witnesses.
        #[arg(long)]
        target: Option<String>,
        /// Domain observing the other variables (default: identity).
        #[arg(long, default_value = "id")]
        eta: String,
    },
    /// Build the program dependence graph.
    Pdg {
        program: PathBuf,
        /// Use semantic flow edges.
        #[arg(long)]
        semantic: bool,
        /// Write Graphviz output to this file.
        #[arg(long)]
        dot: Option<PathBuf>,
        /// Print the slice for these variables at the end of the program.
        #[arg(long, value_delimiter = ',')]
        slice: Vec<String>,
    },
    /// Print the agreement labels computed for a criterion.
    Label {
        program: PathBuf,
        #[arg(long)]
        criterion: Option<PathBuf>,
        /// Agreement observed at the end, e.g. "{par@d}"; overrides --criterion.
        #[arg(long)]
        observe: Option<String>,
        #[arg(long)]
        concrete: bool,
    },
    /// Compute and verify a slice.
    Slice {
        program: PathBuf,
        #[arg(long)]
        criterion: PathBuf,
        /// Observe every criterion variable exactly.
        #[arg(long)]
        concrete: bool,
        /// Print the JSON report instead of the listing.
        #[arg(long)]
        json: bool,
    },
    /// Check that the second program is a slice of the first.
    Check {
        program: PathBuf,
        candidate: PathBuf,
        #[arg(long)]
        criterion: PathBuf,
        /// Check equivalence only, without the subprogram requirement.
        #[arg(long)]
        equivalence: bool,
    },
    /// Simplify a domain until an expression does not depend on some variables.
    Edep {
        #[arg(long)]
        expr: String,
        #[arg(long, default_value = "par")]
        domain: String,
        #[arg(long, value_delimiter = ',', required = true)]
        vars: Vec<String>,
    },
    /// Does every slice for the second criterion also serve the first?
    Subsumes {
        program: PathBuf,
        first: PathBuf,
        second: PathBuf,
    },
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load_program(path: &Path) -> Result<Program> {
    parse_program(&read(path)?).with_context(|| format!("{}", path.display()))
}

fn load_criterion(path: &Path, p: &Program) -> Result<Criterion> {
    parse_criterion(&read(path)?, &p.classes).with_context(|| format!("{}", path.display()))
}

fn library(bound: i64) -> Result<Library> {
    if !(1..=16).contains(&bound) {
        bail!("--bound must be between 1 and 16");
    }
    Ok(Library::new(bound))
}

/// Exit code 1: the analysis ran and gave a negative answer.
fn negative() -> ExitCode {
    ExitCode::from(1)
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    let Common { bound, step_limit } = cli.common;
    let lib = library(bound)?;
    match cli.cmd {
        Cmd::Run { program, input } => {
            let p = load_program(&program)?;
            let mem = parse_memory(&input, &p.classes).context("--input")?;
            let t = run(&p, &mem, step_limit);
            print!("{}", trajectory_to_string(&t, None));
            if t.status != Status::Completed {
                return Ok(negative());
            }
        }
        Cmd::Absint { program, domain } => {
            let p = load_program(&program)?;
            let doms = uniform_map(&p, &lib, &domain)?;
            let inv = infer_invariants(&p, &doms, &AbsState::default());
            print!("{}", render_invariants(&p, &doms, &inv));
        }
        Cmd::Deps { expr, domain, target, eta } => {
            let e = parse_expr(&expr)?;
            let rho = lib.get(&domain)?;
            let relevant = find_ndeps(&e, &rho, &AbsState::default());
            println!("relevant: {{{}}}", relevant.join(", "));
            if let Some(x) = target {
                let eta_map = absslice::absint::DomainMap::uniform(lib.get(&eta)?);
                let show = |w: Option<(absslice::concrete::Memory, absslice::concrete::Memory)>| match w {
                    Some((a, b)) => format!(
                        "yes: {} / {}",
                        absslice::concrete::memory_to_string(&a, None),
                        absslice::concrete::memory_to_string(&b, None)
                    ),
                    None => "no".to_string(),
                };
                println!("semantic dependency on {x}: {}", show(sem_dep_witness(&e, &x, bound)));
                println!("narrow dependency on {x}: {}", show(ndep_witness(&e, &x, &rho, &eta_map, None, bound)));
                let atom = atom_dep(&e, &x, &rho, &eta_map, None, bound);
                println!("atomic dependency on {x}: {}", if atom { "yes" } else { "no" });
            }
        }
        Cmd::Pdg { program, semantic, dot, slice } => {
            let p = load_program(&program)?;
            let (g, kind) = if semantic {
                (build_semantic_pdg(&p, bound), FlowKind::Semantic)
            } else {
                (build_pdg(&p), FlowKind::Syntactic)
            };
            let flow = if semantic { EdgeKind::SemanticFlow } else { EdgeKind::Flow };
            for e in g.edges.iter().filter(|e| e.kind == EdgeKind::Control || e.kind == flow) {
                let from = match e.from {
                    Node::Entry => "entry".to_string(),
                    Node::Line(l) => l.to_string(),
                };
                let what = match (&e.kind, &e.var) {
                    (EdgeKind::Control, _) => "control".to_string(),
                    (_, Some(v)) => format!("flow {v}"),
                    _ => "flow".to_string(),
                };
                println!("{from} -> {} [{what}]", e.to);
            }
            if !slice.is_empty() {
                let lines = g.slice_for(&slice, None, kind)?;
                let lines: Vec<String> = lines.iter().map(|l| l.to_string()).collect();
                println!("slice: {{{}}}", lines.join(", "));
            }
            if let Some(path) = dot {
                std::fs::write(&path, g.to_dot(&p, kind)).with_context(|| format!("cannot write {}", path.display()))?;
            }
        }
        Cmd::Label { program, criterion, observe, concrete } => {
            let p = load_program(&program)?;
            let mode = if concrete { Mode::Concrete } else { Mode::Abstract };
            let (g, beta, heap) = match (observe, criterion) {
                (Some(text), _) => (parse_agreement_for(&text, &p)?, Predicate::truth(), Default::default()),
                (None, Some(path)) => {
                    let c = load_criterion(&path, &p)?;
                    let (g, beta) = absslice::slicer::criterion_agreement(&p, &c, &lib, mode)?;
                    (g, beta, c.heap)
                }
                (None, None) => bail!("label needs --criterion or --observe"),
            };
            let pr = Prover::new(&p, &lib, mode).with_step_limit(step_limit).with_heap(heap);
            if let Some(v) = pr.validate(&g).err() {
                bail!("{v}");
            }
            let labels = pr.label_sequence(&g, &beta);
            print!("{}", pr.render_labels(&labels));
        }
        Cmd::Slice { program, criterion, concrete, json } => {
            let p = load_program(&program)?;
            let c = load_criterion(&criterion, &p)?;
            let opts = SliceOptions { step_limit, ..SliceOptions::default() };
            let res = if concrete { concrete_slice(&p, &c, &lib, &opts) } else { abstract_slice(&p, &c, &lib, &opts) };
            let out = match res {
                Ok(out) => out,
                Err(e @ SliceError::Unverified(_)) => {
                    eprintln!("error: {e}");
                    return Ok(negative());
                }
                Err(e) => return Err(e.into()),
            };
            if json {
                println!("{}", out.report_json());
            } else {
                print!("{}", out.listing());
                println!("kept: {}", lines_text(&out.kept));
                println!("erased: {}", lines_text(&out.erased));
                println!("verified: {}", out.verdict);
            }
        }
        Cmd::Check { program, candidate, criterion, equivalence } => {
            let p = load_program(&program)?;
            let q = load_program(&candidate)?;
            let c = load_criterion(&criterion, &p)?;
            let v = if equivalence {
                equivalent(&p, &q, &c, &lib, step_limit)?
            } else {
                verify_slice(&p, &q, &c, &lib, step_limit)?
            };
            println!("{v}");
            if !v.holds() {
                return Ok(negative());
            }
        }
        Cmd::Edep { expr, domain, vars } => {
            let e = parse_expr(&expr)?;
            let rho = lib.get(&domain)?;
            let x: BTreeSet<String> = vars.into_iter().collect();
            if let Some(v) = x.iter().find(|v| !e.vars().contains(*v)) {
                return Err(anyhow!("{v} does not occur in the expression"));
            }
            let out = edep(&e, &rho, &x, &AbsState::default());
            let names: Vec<String> = out.named_carrier().into_iter().map(|(n, _)| n).collect();
            println!("domain: {{{}}}", names.join(", "));
            let ok = edep_postcondition(&e, &out, &x, &AbsState::default());
            println!("independent: {}", if ok { "yes" } else { "no" });
            if !ok {
                return Ok(negative());
            }
        }
        Cmd::Subsumes { program, first, second } => {
            let p = load_program(&program)?;
            let c1 = load_criterion(&first, &p)?;
            let c2 = load_criterion(&second, &p)?;
            let yes = criterion_subsumes(&c1, &c2, &p, &lib)?;
            println!("{}", if yes { "subsumed" } else { "not subsumed" });
            if !yes {
                return Ok(negative());
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn lines_text(lines: &BTreeSet<u32>) -> String {
    let v: Vec<String> = lines.iter().map(|l| l.to_string()).collect();
    format!("{{{}}}", v.join(", "))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
