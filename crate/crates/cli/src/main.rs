use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use metaqsim::kwise::forrelation::{default_threshold, forrelation_demo};
use metaqsim::kwise::{
    check_ratio_bound, exhaustive_ratio_search, kwise_epsilon, ClassicalPostStrategy, ExplicitDistribution,
};
use metaqsim::query::circuits::{query_accept_polys, tree_from_adaptive_circuit, QueryCircuit};
use metaqsim::query::poly::{interpolate_multilinear, parse_bits, parse_value_table, TruthTable};
use metaqsim::query::rdeg::{rdeg, rdeg_feasible};
use metaqsim::query::tree::{
    ada_eval, ada_len, all_points, build_ada_tree, build_and_rational, check_approx, check_approx_on, random_points,
    RationalTree,
};
use metaqsim::reductions::{apply_pass, compile_pdqp_to_corr, Pass};
use metaqsim::sampler::{ClassicalSampler, SamplerMode};
use metaqsim::{parse_circuit, render_circuit, Circuit, Error, Rational, Result, SimConfig, Simulator};

#[derive(Parser)]
#[command(name = "metaqsim", version, about = "Exact simulation of circuits with postselection and correlated measurement")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunInput {
    /// Classical input bits for the circuit's `input` qubits.
    #[arg(long, default_value = "")]
    input: String,
    /// Oracle string read by `query` ops.
    #[arg(long, default_value = "")]
    oracle: String,
}

#[derive(Subcommand)]
enum Command {
    /// Exact distribution over reported transcripts.
    Run {
        circuit: PathBuf,
        #[command(flatten)]
        io: RunInput,
        /// Worker threads for branch expansion.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Print only the output distribution.
        #[arg(long)]
        output_only: bool,
    },
    /// Seeded shots from the exact simulator.
    Sample {
        circuit: PathBuf,
        #[command(flatten)]
        io: RunInput,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        shots: u64,
    },
    /// Apply compilation passes in order and print the resulting circuit.
    Compile {
        circuit: PathBuf,
        /// post2corr, adpost2corr, pdqp2corr, amplify:M, inline:M or elide.
        #[arg(long = "pass", required = true)]
        passes: Vec<String>,
        /// Classical post-processing circuit for pdqp2corr.
        #[arg(long)]
        postprocess: Option<PathBuf>,
    },
    /// Sample through the exact probability oracle.
    Csample {
        circuit: PathBuf,
        #[command(flatten)]
        io: RunInput,
        #[arg(long, default_value = "filtered")]
        mode: SamplerMode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        shots: u64,
        /// Print the sampler's exact distribution instead of shots.
        #[arg(long)]
        enumerate: bool,
    },
    /// Compare the exact distributions of two circuits.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[command(flatten)]
        io: RunInput,
        /// Compare output distributions only.
        #[arg(long)]
        output_only: bool,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Rational degree of a truth table, or feasibility at one degree.
    Rdeg {
        table: PathBuf,
        #[arg(long, default_value = "0")]
        eps: Rational,
        /// Only test this degree.
        #[arg(long)]
        degree: Option<usize>,
    },
    /// Rational trees.
    #[command(subcommand)]
    Tree(TreeCommand),
    /// Multilinear polynomials.
    #[command(subcommand)]
    Poly(PolyCommand),
    /// k-wise equivalence of explicit distributions.
    #[command(subcommand)]
    Kwise(KwiseCommand),
    /// Forrelation threshold test on sampled instances.
    Forrelation {
        #[arg(long, default_value_t = 8)]
        m: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2000)]
        trials: usize,
        /// Accept when the forrelation value is at least this; defaults to 1/pi.
        #[arg(long)]
        threshold: Option<f64>,
    },
}

#[derive(Subcommand)]
enum TreeCommand {
    /// Acceptance probability at one input.
    Eval {
        tree: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        x: String,
    },
    /// Sum over paths of products of node factors.
    Flatten {
        tree: PathBuf,
        #[arg(long)]
        n: usize,
    },
    /// Exhaustive approximation check against a truth table.
    Check {
        tree: PathBuf,
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        eps: Rational,
    },
    /// Tree for Ada(AND_n, d) with degree-one nodes.
    AdaBuild {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        depth: usize,
        /// Per-node error of the AND approximator.
        #[arg(long, default_value = "1/12")]
        eps: Rational,
        /// Verify against Ada(AND_n, d): exhaustive up to 20 input bits,
        /// sampled beyond.
        #[arg(long)]
        check: bool,
        #[arg(long, default_value_t = 10000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum PolyCommand {
    /// Multilinear polynomial through a table `<bits> <value>`.
    Interpolate { table: PathBuf },
    /// Acceptance polynomials of a query circuit over an `n`-bit oracle.
    Extract {
        circuit: PathBuf,
        #[arg(long)]
        n: usize,
    },
}

#[derive(Subcommand)]
enum KwiseCommand {
    /// Tightest parameter over k-terms.
    Epsilon {
        d0: PathBuf,
        d1: PathBuf,
        #[arg(long)]
        k: usize,
    },
    /// Acceptance-ratio window for one strategy, or every grid strategy of
    /// depth at most 2 with `--search`.
    RatioBound {
        d0: PathBuf,
        d1: PathBuf,
        #[arg(long, default_value_t = 2)]
        k: usize,
        /// Strategy text, e.g. `z0 ? leaf(p=1, o=1) : leaf(p=1, o=0)`.
        #[arg(long, conflicts_with = "search")]
        strategy: Option<String>,
        #[arg(long)]
        search: bool,
    },
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))
}

fn load_circuit(path: &Path) -> Result<Circuit> {
    parse_circuit(&read(path)?)
}

fn bits(s: &str) -> Result<Vec<bool>> {
    parse_bits(s.trim())
}

fn simulator<'c>(c: &'c Circuit, io: &RunInput, jobs: usize) -> Result<Simulator<'c>> {
    Ok(Simulator::new(c)?
        .with_config(SimConfig {
            jobs: jobs.max(1),
            ..SimConfig::default()
        })
        .with_oracle(bits(&io.oracle)?))
}

fn execute(cmd: Command) -> Result<String> {
    let mut out = String::new();
    match cmd {
        Command::Run {
            circuit,
            io,
            jobs,
            output_only,
        } => {
            let c = load_circuit(&circuit)?;
            let dist = simulator(&c, &io, jobs)?.run_exhaustive(&bits(&io.input)?)?;
            let dist = if output_only { dist.output_only() } else { dist };
            write!(out, "{dist}").unwrap();
        }
        Command::Sample {
            circuit,
            io,
            seed,
            shots,
        } => {
            let c = load_circuit(&circuit)?;
            let counts = simulator(&c, &io, 1)?.run_sampled(&bits(&io.input)?, seed, shots)?;
            write!(out, "{counts}").unwrap();
        }
        Command::Compile {
            circuit,
            passes,
            postprocess,
        } => {
            let mut c = load_circuit(&circuit)?;
            let post = postprocess.as_deref().map(load_circuit).transpose()?;
            for p in &passes {
                let pass: Pass = p.parse()?;
                c = match (&pass, &post) {
                    (Pass::PdqpToCorr, Some(pp)) => compile_pdqp_to_corr(&c, Some(pp))?,
                    _ => apply_pass(&c, &pass)?,
                };
            }
            out.push_str(&render_circuit(&c));
        }
        Command::Csample {
            circuit,
            io,
            mode,
            seed,
            shots,
            enumerate,
        } => {
            let c = load_circuit(&circuit)?;
            let sampler = ClassicalSampler::with_input(&c, mode, &bits(&io.input)?, &bits(&io.oracle)?)?;
            if enumerate {
                write!(out, "{}", sampler.enumerate()?).unwrap();
            } else {
                write!(out, "{}", sampler.sample_shots(seed, shots)?).unwrap();
            }
        }
        Command::Compare {
            a,
            b,
            io,
            output_only,
            jobs,
        } => {
            let (ca, cb) = (load_circuit(&a)?, load_circuit(&b)?);
            let input = bits(&io.input)?;
            let mut da = simulator(&ca, &io, jobs)?.run_exhaustive(&input)?;
            let mut db = simulator(&cb, &io, jobs)?.run_exhaustive(&input)?;
            if output_only {
                da = da.output_only();
                db = db.output_only();
            }
            match da.first_difference(&db) {
                None => out.push_str("EQUAL\n"),
                Some((t, pa, pb)) => {
                    let t = if t.is_empty() { "-".to_string() } else { t };
                    writeln!(out, "DIFFER\t{t}\t{pa}\t{pb}").unwrap();
                }
            }
        }
        Command::Rdeg { table, eps, degree } => {
            let f = TruthTable::parse(&read(&table)?)?;
            match degree {
                Some(d) => match rdeg_feasible(&f, &eps, d)? {
                    Some(w) => {
                        writeln!(out, "feasible\ttrue").unwrap();
                        writeln!(out, "witness\t{}", w.function).unwrap();
                    }
                    None => writeln!(out, "feasible\tfalse").unwrap(),
                },
                None => {
                    let (d, w) = rdeg(&f, &eps)?;
                    writeln!(out, "rdeg\t{d}").unwrap();
                    writeln!(out, "deg\t{}", f.degree()).unwrap();
                    writeln!(out, "witness\t{w}").unwrap();
                }
            }
        }
        Command::Tree(t) => tree_command(t, &mut out)?,
        Command::Poly(p) => match p {
            PolyCommand::Interpolate { table } => {
                let (_, values) = parse_value_table(&read(&table)?)?;
                let p = interpolate_multilinear(&values)?;
                writeln!(out, "{p}").unwrap();
                writeln!(out, "degree\t{}", p.degree()).unwrap();
            }
            PolyCommand::Extract { circuit, n } => {
                let qc = QueryCircuit::new(load_circuit(&circuit)?, n)?;
                writeln!(out, "queries\t{}", qc.queries()).unwrap();
                if qc.measurements() == 0 {
                    let polys = query_accept_polys(&qc)?;
                    writeln!(out, "P\t{}", polys.p).unwrap();
                    writeln!(out, "Q\t{}", polys.q).unwrap();
                    writeln!(out, "degree\t{}", polys.p.degree().max(polys.q.degree())).unwrap();
                } else {
                    let tree = tree_from_adaptive_circuit(&qc)?;
                    writeln!(out, "degree\t{}", tree.degree()).unwrap();
                    write!(out, "{tree}").unwrap();
                }
            }
        },
        Command::Kwise(k) => match k {
            KwiseCommand::Epsilon { d0, d1, k } => {
                let d0 = ExplicitDistribution::parse(&read(&d0)?)?;
                let d1 = ExplicitDistribution::parse(&read(&d1)?)?;
                writeln!(out, "epsilon\t{}", kwise_epsilon(&d0, &d1, k)?).unwrap();
            }
            KwiseCommand::RatioBound {
                d0,
                d1,
                k,
                strategy,
                search,
            } => {
                let d0 = ExplicitDistribution::parse(&read(&d0)?)?;
                let d1 = ExplicitDistribution::parse(&read(&d1)?)?;
                if search {
                    let rep = exhaustive_ratio_search(&d0, &d1)?;
                    writeln!(out, "eps\t{}", rep.eps).unwrap();
                    writeln!(out, "strategies\t{}", rep.strategies).unwrap();
                    writeln!(out, "violations\t{}", rep.violations).unwrap();
                    if let Some((s, ratio)) = rep.best {
                        writeln!(out, "best_ratio\t{ratio}").unwrap();
                        writeln!(out, "best_strategy\t{s}").unwrap();
                    }
                } else {
                    let text = strategy
                        .ok_or_else(|| Error::Parse("give --strategy or --search".into()))?;
                    let s: ClassicalPostStrategy = text.parse()?;
                    write!(out, "{}", check_ratio_bound(&d0, &d1, k, &s)?).unwrap();
                }
            }
        },
        Command::Forrelation {
            m,
            seed,
            trials,
            threshold,
        } => {
            let rep = forrelation_demo(m, seed, trials, threshold.unwrap_or_else(default_threshold))?;
            write!(out, "{rep}").unwrap();
        }
    }
    Ok(out)
}

fn tree_command(cmd: TreeCommand, out: &mut String) -> Result<()> {
    match cmd {
        TreeCommand::Eval { tree, n, x } => {
            let t = RationalTree::parse(n, &read(&tree)?)?;
            let x = bits(&x)?;
            if x.len() != n {
                return Err(Error::InputLength {
                    expected: n,
                    got: x.len(),
                });
            }
            writeln!(out, "{}", t.eval(&x)).unwrap();
        }
        TreeCommand::Flatten { tree, n } => {
            let t = RationalTree::parse(n, &read(&tree)?)?;
            write!(out, "{}", t.flatten()).unwrap();
        }
        TreeCommand::Check { tree, table, eps } => {
            let f = TruthTable::parse(&read(&table)?)?;
            let t = RationalTree::parse(f.vars(), &read(&tree)?)?;
            writeln!(out, "degree\t{}", t.degree()).unwrap();
            write!(out, "{}", check_approx(&t, &f, &eps)?).unwrap();
        }
        TreeCommand::AdaBuild {
            n,
            depth,
            eps,
            check,
            samples,
            seed,
        } => {
            let node = build_and_rational(n, &eps)?;
            let tree = build_ada_tree(&node, depth);
            let len = ada_len(n, depth);
            writeln!(out, "# inputs {len}").unwrap();
            writeln!(out, "# degree {}", tree.degree()).unwrap();
            if check {
                let f = TruthTable::and(n);
                let target = |x: &[bool]| ada_eval(&f, depth, x).expect("length matches");
                let bound = Rational::from((depth + 1) as i64) * &eps;
                let report = if len <= 20 {
                    check_approx_on(all_points(len), |x| tree.eval(x), target, &bound)
                } else {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    check_approx_on(random_points(len, samples, &mut rng), |x| tree.eval(x), target, &bound)
                };
                writeln!(out, "# bound {bound}").unwrap();
                for line in report.to_string().lines() {
                    writeln!(out, "# {line}").unwrap();
                }
            }
            write!(out, "{tree}").unwrap();
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}
