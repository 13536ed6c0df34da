use std::process::ExitCode;

use clap::{Parser, Subcommand};

use elastic_cloak_cli::{run, Command, RunConfig};

#[derive(Parser)]
#[command(name = "elastic-cloak", version, about = "Elastic cloaking and high-contrast inclusion experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<std::path::PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<String>,
    #[arg(long, global = true)]
    h: Option<String>,
    #[arg(long, global = true)]
    order: Option<String>,
    #[arg(long, global = true)]
    epsilon: Option<String>,
    /// Comma-separated contrasts.
    #[arg(long, global = true)]
    eta_list: Option<String>,
    /// none, disk, ellipse or rectangle.
    #[arg(long, global = true)]
    shape: Option<String>,
    #[arg(long, global = true)]
    a: Option<String>,
    #[arg(long, global = true)]
    b: Option<String>,
    #[arg(long, global = true)]
    omega: Option<String>,
    /// cosserat, symmetrized, layered or willis.
    #[arg(long, global = true)]
    family: Option<String>,
    #[arg(long, global = true)]
    layers_n: Option<String>,
    #[arg(long, global = true)]
    threads: Option<String>,
    /// soft or hard.
    #[arg(long, global = true)]
    direction: Option<String>,
    /// Any configuration key, as `key=value`; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Cloak tensor components over the normalized annulus.
    Profile,
    /// Isotropic layers approximating the symmetrized cloak.
    Layers,
    /// One transmission (or time-harmonic) solve with field exports.
    Solve,
    /// Distances to the soft or hard limit over a contrast list.
    ContrastSweep,
    /// Distances to the homogeneous field over defect radii.
    DefectSweep,
    /// Boundary distances of a cloaked inclusion over epsilon.
    Nearcloak,
    /// Layered versus symmetrized cloak over layer counts.
    LayeredCompare,
    /// Manufactured-solution convergence rates.
    Convergence,
}

impl Cli {
    fn overrides(&self) -> Vec<(String, String)> {
        let mut v: Vec<(String, String)> = [
            ("out", &self.out),
            ("h", &self.h),
            ("order", &self.order),
            ("epsilon", &self.epsilon),
            ("eta_list", &self.eta_list),
            ("shape", &self.shape),
            ("a", &self.a),
            ("b", &self.b),
            ("omega", &self.omega),
            ("layers_n", &self.layers_n),
            ("family", &self.family),
            ("threads", &self.threads),
            ("direction", &self.direction),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.clone().map(|v| (k.to_string(), v)))
        .collect();
        for s in &self.set {
            match s.split_once('=') {
                Some((k, val)) => v.push((k.trim().to_string(), val.to_string())),
                None => v.push((s.clone(), String::new())),
            }
        }
        v
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let text = match &cli.config {
        Some(p) => match std::fs::read_to_string(p) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("cannot read {}: {e}", p.display());
                return ExitCode::from(4);
            }
        },
        None => String::new(),
    };
    let mut cfg = match RunConfig::parse(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("configuration error: {e}");
            return ExitCode::from(2);
        }
    };
    for (k, v) in cli.overrides() {
        if let Err(e) = cfg.set(&k, &v) {
            eprintln!("configuration error: --{}: {}", e.key, e.message);
            return ExitCode::from(2);
        }
    }
    let command = match cli.command {
        Cmd::Profile => Command::Profile,
        Cmd::Layers => Command::Layers,
        Cmd::Solve => Command::Solve,
        Cmd::ContrastSweep => Command::ContrastSweep,
        Cmd::DefectSweep => Command::DefectSweep,
        Cmd::Nearcloak => Command::Nearcloak,
        Cmd::LayeredCompare => Command::LayeredCompare,
        Cmd::Convergence => Command::Convergence,
    };
    match run(command, &cfg) {
        Ok(o) => {
            for s in &o.steps {
                eprintln!("{}: {:.2} s", s.name, s.runtime_s);
            }
            println!("{} -> {} ({} files)", o.command, cfg.out, o.outputs.len() + 1);
            if o.passed {
                ExitCode::SUCCESS
            } else {
                for c in &o.failed_checks {
                    eprintln!("check failed: {c}");
                }
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use clap::CommandFactory;

    use super::*;

    #[test]
    fn arguments_are_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn flags_become_overrides() {
        let cli = Cli::parse_from(["elastic-cloak", "solve", "--h", "0.4", "--set", "seed=3", "--set", "bogus"]);
        assert_eq!(
            cli.overrides(),
            vec![
                ("h".to_string(), "0.4".to_string()),
                ("seed".to_string(), "3".to_string()),
                ("bogus".to_string(), String::new()),
            ]
        );
    }
}
