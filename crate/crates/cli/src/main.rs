//! `ballchain` command-line front end.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use ballchain::output::{parse_commands, summary_csv};
use ballchain::scenario::{preset, preset_names, DesignSelection};
use ballchain::{DesignKind, Scenario};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "ballchain",
    version,
    about = "Quasi-static magnetic ball-chain simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve one equilibrium (or a field sweep) and write CSV, JSON and SVG.
    Solve(RunArgs),
    /// Scan the reachable tip workspace of one or more designs.
    Workspace(RunArgs),
    /// Run a scripted navigation headlessly and write the session log.
    Navigate {
        #[command(flatten)]
        run: RunArgs,
        /// JSON array of commands replacing the scenario's own list.
        #[arg(long)]
        commands: Option<PathBuf>,
    },
    /// Start the HTTP service.
    Serve {
        #[arg(long, default_value = ballchain_service::DEFAULT_BIND)]
        bind: SocketAddr,
        /// Minutes before an idle session is dropped.
        #[arg(long, default_value_t = 30)]
        idle_minutes: u64,
    },
    /// Run the gradient and oracle self-checks.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Random configurations per gradient case.
        #[arg(long, default_value_t = 100)]
        configs: usize,
    },
    /// List built-in scenarios, or write them as JSON files.
    Presets {
        #[arg(long)]
        write: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file, or the name of a built-in scenario.
    #[arg(long)]
    scenario: String,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the design: ball_chain, tip_magnet or distributed_particles.
    #[arg(long)]
    design: Option<DesignKind>,
    /// Drop skin bending.
    #[arg(long)]
    no_skin: bool,
    /// Worker threads for parallel sweeps.
    #[arg(long)]
    parallel: Option<usize>,
}

impl RunArgs {
    fn scenario(&self, workspace: bool) -> ballchain::Result<Scenario> {
        let path = Path::new(&self.scenario);
        let mut s = if path.exists() {
            Scenario::load(path)?
        } else if preset_names().contains(&self.scenario) {
            preset(&self.scenario)?
        } else {
            return Err(ballchain::Error::InvalidInput(format!(
                "`{}` is neither a file nor a built-in scenario ({})",
                self.scenario,
                preset_names().join(", ")
            )));
        };
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        if let Some(kind) = self.design {
            if kind != s.design.kind {
                s.design = DesignSelection::table(kind);
            }
            if workspace {
                s.workspace.get_or_insert_with(Default::default).designs = vec![s.design.clone()];
            }
        }
        if self.no_skin {
            s.terms.skin = false;
        }
        if let Some(k) = self.parallel {
            rayon::ThreadPoolBuilder::new()
                .num_threads(k.max(1))
                .build_global()
                .map_err(|e| ballchain::Error::InvalidInput(format!("thread pool: {e}")))?;
        }
        Ok(s)
    }
}

fn list(files: &[PathBuf]) {
    for f in files {
        println!("wrote {}", f.display());
    }
}

fn run(cli: Cli) -> ballchain::Result<ExitCode> {
    match cli.command {
        Cmd::Solve(args) => {
            let s = args.scenario(false)?;
            let run = ballchain::run_solve(&s, &args.out)?;
            for r in &run.reports {
                println!(
                    "step {}: {} after {} iterations, tip ({:.4}, {:.4}, {:.4}) mm, energy {:.6e} J",
                    r.step,
                    if r.converged { "converged" } else { "NOT converged" },
                    r.iterations,
                    r.tip_mm[0],
                    r.tip_mm[1],
                    r.tip_mm[2],
                    r.energy_j.total
                );
                for w in &r.warnings {
                    eprintln!("warning: {w}");
                }
            }
            list(&run.files);
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Workspace(args) => {
            let s = args.scenario(true)?;
            let run = ballchain::run_workspace(&s, &args.out)?;
            print!("{}", summary_csv(&run.summary));
            for scan in &run.scans {
                for w in &scan.warnings {
                    eprintln!("warning ({}): {w}", scan.design);
                }
            }
            list(&run.files);
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Navigate {
            run: args,
            commands,
        } => {
            let s = args.scenario(false)?;
            let commands = match commands {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).map_err(|e| ballchain::Error::Io {
                        path: p.clone(),
                        source: e,
                    })?;
                    Some(parse_commands(&text)?)
                }
                None => None,
            };
            let run = ballchain::run_navigation_script(&s, commands, &args.out)?;
            let sm = &run.summary;
            println!(
                "{} steps on {}: final tip region {}, {} jammed, {} collisions, max penetration {:.4} mm",
                sm.steps,
                sm.scene,
                sm.final_tip_region.as_deref().unwrap_or("none"),
                sm.jammed_steps,
                sm.collisions,
                sm.max_penetration_mm
            );
            list(&run.files);
            match sm.reached_target {
                Some(false) => {
                    eprintln!(
                        "target branch `{}` not reached",
                        sm.target_branch.as_deref().unwrap_or_default()
                    );
                    Ok(ExitCode::from(3))
                }
                _ => Ok(ExitCode::SUCCESS),
            }
        }
        Cmd::Serve { bind, idle_minutes } => {
            let state = ballchain_service::AppState::new(Duration::from_secs(60 * idle_minutes));
            let rt = tokio::runtime::Runtime::new()
                .map_err(|e| ballchain::Error::InvalidInput(e.to_string()))?;
            println!("listening on http://{bind}");
            rt.block_on(ballchain_service::serve(bind, state))
                .map_err(|e| ballchain::Error::InvalidInput(format!("server on {bind}: {e}")))?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Verify { seed, configs } => {
            let checks = ballchain::verify::run_checks(seed, configs)?;
            let mut ok = true;
            for c in &checks {
                println!(
                    "{} {}: {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                );
                ok &= c.passed;
            }
            Ok(if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(3)
            })
        }
        Cmd::Presets { write } => {
            for name in preset_names() {
                match &write {
                    Some(dir) => {
                        std::fs::create_dir_all(dir).map_err(|e| ballchain::Error::Io {
                            path: dir.clone(),
                            source: e,
                        })?;
                        let path = dir.join(format!("{name}.json"));
                        let mut text = preset(&name)?.to_json();
                        text.push('\n');
                        std::fs::write(&path, text).map_err(|e| ballchain::Error::Io {
                            path: path.clone(),
                            source: e,
                        })?;
                        println!("wrote {}", path.display());
                    }
                    None => println!("{name}"),
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
