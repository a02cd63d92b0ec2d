use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use jacobi_core::mkdv::GridSpec;
use jacobi_core::transform_catalog::{BranchAssignment, BranchSymbol};
use jacobi_core::C64;

/// Tolerance names accepted by `--tol`.
pub const TOLERANCE_NAMES: [&str; 8] =
    ["exact", "path", "phi", "mkdv", "pole", "algebraic", "derivative", "equivalence"];

#[derive(Debug, Parser)]
#[command(
    name = "jacobi",
    version,
    about = "Jacobi elliptic functions, transformation catalog checks and mKdV residuals"
)]
pub struct Cli {
    /// Base seed for every sampled check.
    #[arg(long, global = true, default_value = "0x5EED", value_parser = parse_seed)]
    pub seed: u64,

    /// Override a tolerance, e.g. `--tol exact=1e-9`. Repeatable.
    #[arg(long = "tol", global = true, value_name = "NAME=VALUE", value_parser = parse_tol)]
    pub tolerances: Vec<(String, f64)>,

    /// Write reports here instead of standard output.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    /// Rule catalog (TOML). Falls back to the built-in catalog.
    #[arg(long, global = true, env = "JACOBI_CATALOG")]
    pub catalog: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

impl Cli {
    pub fn tolerances(&self) -> BTreeMap<&str, f64> {
        self.tolerances.iter().map(|(k, v)| (k.as_str(), *v)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate one of the twelve Jacobi functions.
    Eval {
        #[arg(long = "fn", value_name = "KIND")]
        kind: String,
        #[arg(long, allow_hyphen_values = true, value_parser = parse_complex)]
        x: C64,
        #[command(flatten)]
        param: ParamArgs,
    },
    /// Check one catalog rule at one parameter value.
    VerifyIdentity {
        #[arg(long)]
        rule: String,
        #[command(flatten)]
        param: ParamArgs,
        #[command(flatten)]
        branches: BranchArgs,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        /// Check the rule as printed rather than the corrected form.
        #[arg(long)]
        printed: bool,
    },
    /// Check every rule, parameter value and branch assignment.
    VerifyAll {
        /// Parameter values; defaults to 0.2, 0.5, 0.8 and 0.3+0.2i.
        #[arg(long = "k", value_delimiter = ',', allow_hyphen_values = true, value_parser = parse_complex)]
        k: Vec<C64>,
        /// Moduli; converted via parameter = modulus^2.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, value_parser = parse_complex, conflicts_with = "k")]
        modulus: Vec<C64>,
        #[arg(long, default_value_t = 200)]
        samples: usize,
    },
    /// Recover the phase from initial values (sn, cn, dn).
    SolvePhase {
        #[arg(long, allow_hyphen_values = true, value_parser = parse_complex)]
        s0: C64,
        #[arg(long, allow_hyphen_values = true, value_parser = parse_complex)]
        c0: C64,
        #[arg(long, allow_hyphen_values = true, value_parser = parse_complex)]
        d0: C64,
        #[command(flatten)]
        param: ParamArgs,
    },
    /// Residuals of the phi-equation and of mKdV for one solution.
    MkdvCheck {
        #[command(flatten)]
        solution: SolutionArgs,
        #[command(flatten)]
        grid: GridArgs,
        /// Also report the x-stencil convergence ratio between 2 hx and hx.
        #[arg(long)]
        order: bool,
        /// Write the sampled u field as CSV.
        #[arg(long, value_name = "PATH")]
        dump_u: Option<PathBuf>,
    },
    /// Apply a catalog rule to a solution and check the result.
    Transform {
        #[command(flatten)]
        solution: SolutionArgs,
        #[arg(long)]
        rule: String,
        #[command(flatten)]
        branches: BranchArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value_t = 200)]
        samples: usize,
    },
    /// Equivalence of solutions listed in a TOML file (first against the rest),
    /// or of sn/cn/dn at parameter k against a shifted copy.
    Equiv {
        #[arg(long, value_name = "PATH", conflicts_with_all = ["phase", "scale"])]
        solutions: Option<PathBuf>,
        #[command(flatten)]
        param: OptParamArgs,
        #[arg(long, allow_hyphen_values = true, value_parser = parse_complex)]
        phase: Option<C64>,
        #[arg(long, allow_hyphen_values = true, value_parser = parse_complex)]
        scale: Option<C64>,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value_t = 200)]
        samples: usize,
    },
}

#[derive(Debug, Args)]
pub struct ParamArgs {
    /// Parameter k (dn^2 + k sn^2 = 1).
    #[arg(long, allow_hyphen_values = true, value_parser = parse_complex, required_unless_present = "modulus")]
    pub k: Option<C64>,
    /// Modulus; the parameter is its square.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_complex, conflicts_with = "k")]
    pub modulus: Option<C64>,
}

impl ParamArgs {
    pub fn value(&self) -> C64 {
        self.k.or(self.modulus.map(|m| m * m)).expect("clap enforces one of --k/--modulus")
    }
}

#[derive(Debug, Args)]
pub struct OptParamArgs {
    #[arg(long, allow_hyphen_values = true, value_parser = parse_complex)]
    pub k: Option<C64>,
    #[arg(long, allow_hyphen_values = true, value_parser = parse_complex, conflicts_with = "k")]
    pub modulus: Option<C64>,
}

impl OptParamArgs {
    pub fn value(&self) -> Option<C64> {
        self.k.or(self.modulus.map(|m| m * m))
    }
}

#[derive(Debug, Args)]
pub struct BranchArgs {
    /// Branch symbol values, e.g. `--branch eps=-1 --branch p=0`.
    #[arg(long = "branch", value_name = "SYMBOL=VALUE", allow_hyphen_values = true, value_parser = parse_branch)]
    pub values: Vec<(BranchSymbol, i8)>,
}

impl BranchArgs {
    pub fn assignment(&self) -> BranchAssignment {
        self.values.iter().fold(BranchAssignment::new(), |b, &(s, v)| b.with(s, v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormArg {
    Phi0,
    Phi1,
}

#[derive(Debug, Args)]
pub struct SolutionArgs {
    #[arg(long, value_enum, default_value_t = FormArg::Phi0)]
    pub form: FormArg,
    #[arg(long, allow_hyphen_values = true)]
    pub k: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub m: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 1.0)]
    pub a: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 1.0)]
    pub c: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    pub a0: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    pub c0: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 1, value_parser = parse_sign)]
    pub sigma: i8,
    #[arg(long, allow_hyphen_values = true, default_value_t = 1, value_parser = parse_sign)]
    pub nu: i8,
}

/// Sampling window; unset fields take the command's default.
#[derive(Debug, Args)]
pub struct GridArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub x1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub t0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub t1: Option<f64>,
    #[arg(long)]
    pub hx: Option<f64>,
    #[arg(long)]
    pub ht: Option<f64>,
}

impl GridArgs {
    pub fn resolve(&self, d: GridSpec) -> GridSpec {
        GridSpec::new(
            (self.x0.unwrap_or(d.x0), self.x1.unwrap_or(d.x1)),
            (self.t0.unwrap_or(d.t0), self.t1.unwrap_or(d.t1)),
            self.hx.unwrap_or(d.hx),
            self.ht.unwrap_or(d.ht),
        )
    }
}

pub fn parse_seed(s: &str) -> Result<u64, String> {
    let s = s.trim();
    let r = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => s.parse(),
    };
    r.map_err(|e| format!("invalid seed `{s}`: {e}"))
}

pub fn parse_tol(s: &str) -> Result<(String, f64), String> {
    let (name, value) = s.split_once('=').ok_or_else(|| format!("expected NAME=VALUE, got `{s}`"))?;
    let name = name.trim();
    if !TOLERANCE_NAMES.contains(&name) {
        return Err(format!("unknown tolerance `{name}` (known: {})", TOLERANCE_NAMES.join(", ")));
    }
    let v: f64 = value.trim().parse().map_err(|e| format!("invalid value for `{name}`: {e}"))?;
    if !(v.is_finite() && v > 0.0) {
        return Err(format!("tolerance `{name}` must be positive and finite"));
    }
    Ok((name.to_string(), v))
}

pub fn parse_branch(s: &str) -> Result<(BranchSymbol, i8), String> {
    let (name, value) = s.split_once('=').ok_or_else(|| format!("expected SYMBOL=VALUE, got `{s}`"))?;
    let sym = BranchSymbol::parse(name.trim()).ok_or_else(|| format!("unknown branch symbol `{name}`"))?;
    let v: i8 = value.trim().trim_start_matches('+').parse().map_err(|e| format!("invalid value for `{name}`: {e}"))?;
    if !sym.values().contains(&v) {
        return Err(format!("`{name}` takes one of {:?}", sym.values()));
    }
    Ok((sym, v))
}

fn parse_sign(s: &str) -> Result<i8, String> {
    match s.trim().trim_start_matches('+') {
        "1" => Ok(1),
        "-1" => Ok(-1),
        _ => Err(format!("expected 1 or -1, got `{s}`")),
    }
}

/// Reads `a`, `bi`, `a+bi` or `a-bi` (also `i`, `-i`, and `j` for `i`).
pub fn parse_complex(s: &str) -> Result<C64, String> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || format!("invalid complex number `{s}`");
    if t.is_empty() {
        return Err(bad());
    }
    let Some(body) = t.strip_suffix('i').or_else(|| t.strip_suffix('j')) else {
        return t.parse::<f64>().map(|re| C64::new(re, 0.0)).map_err(|_| bad());
    };
    // Split before the last sign that is not the leading sign or an exponent sign.
    let bytes = body.as_bytes();
    let split =
        (1..bytes.len()).rev().find(|&i| matches!(bytes[i], b'+' | b'-') && !matches!(bytes[i - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(i) => (&body[..i], &body[i..]),
        None => ("0", body),
    };
    let im = match im {
        "" | "+" => 1.0,
        "-" => -1.0,
        v => v.parse::<f64>().map_err(|_| bad())?,
    };
    let re = re.parse::<f64>().map_err(|_| bad())?;
    Ok(C64::new(re, im))
}
