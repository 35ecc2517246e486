use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use num_bigint::BigUint;

#[derive(Debug, Parser)]
#[command(
    name = "handlebody",
    version,
    about = "Schottky groups, graphs of finite groups and star-family realizations"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// Tolerance for Lorentz and orthogonality residuals.
    #[arg(long, global = true)]
    pub tol_orth: Option<f64>,
    /// Tolerance for eigenvalue and rank decisions.
    #[arg(long, global = true)]
    pub tol_classify: Option<f64>,
    /// Band around the cap tangency thresholds.
    #[arg(long, global = true)]
    pub tol_geom: Option<f64>,
    /// JSON file with any of `tol_orth`, `tol_classify`, `tol_geom`.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// JSON object mapping dimensions to Jordan constants, e.g. `{"3": 48}`.
    #[arg(long, global = true, value_name = "FILE")]
    pub jordan_table: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Artifact path: the realization for `realize`, the group for
    /// `schottky random`, the cap CSV for `schottky limitset`, the report
    /// otherwise.
    #[arg(long, global = true, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Computations on a graph of groups given as JSON.
    Gog {
        #[command(subcommand)]
        cmd: GogCmd,
    },
    /// Crude and refined bounds on the order of a finite extension.
    Bounds {
        #[arg(long)]
        g: BigUint,
        #[arg(long)]
        dim: u32,
        /// Constant in front of the bounds.
        #[arg(long, default_value = "1")]
        jordan_c: BigUint,
    },
    /// Builds a star family and audits it.
    Family {
        #[command(subcommand)]
        cmd: FamilyCmd,
    },
    /// Realizes a star family by hyperbolic isometries and verifies it.
    Realize {
        #[arg(long)]
        k: u32,
        /// Abelian family parameter.
        #[arg(long, conflicts_with = "p", required_unless_present = "p")]
        m: Option<u64>,
        /// Cyclic family prime.
        #[arg(long)]
        p: Option<u64>,
        /// Use dimension 2k + 1 instead of 2k.
        #[arg(long)]
        odd: bool,
        /// Shorthand for --tol-orth.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Re-verifies a stored realization.
    Verify { file: PathBuf },
    /// Samples kernel elements of a stored realization.
    KernelSample {
        file: PathBuf,
        #[arg(long, default_value_t = 200)]
        count: usize,
        #[arg(long, default_value_t = 8)]
        maxlen: usize,
    },
    /// Classical Schottky groups.
    Schottky {
        #[command(subcommand)]
        cmd: SchottkyCmd,
    },
}

#[derive(Debug, Subcommand)]
pub enum GogCmd {
    /// Euler characteristic and normal-form status.
    Chi { file: PathBuf },
    /// Rank of the free kernel for an extension of order n.
    Genus {
        file: PathBuf,
        #[arg(long)]
        n: BigUint,
    },
    /// Edge-order audit; all edges unless --edge is given.
    Lemma3 {
        file: PathBuf,
        #[arg(long)]
        n: BigUint,
        #[arg(long)]
        edge: Option<u64>,
    },
    /// Collapses trivial edges.
    Collapse { file: PathBuf },
    /// Random normal-form graph with negative Euler characteristic.
    Random {
        #[arg(long, default_value_t = 6)]
        max_vertices: usize,
        #[arg(long, default_value_t = 24)]
        max_order: u64,
    },
}

#[derive(Debug, Subcommand)]
pub enum FamilyCmd {
    Abelian {
        #[arg(long)]
        k: u32,
        #[arg(long)]
        m: u64,
        #[arg(long)]
        odd: bool,
    },
    Cyclic {
        #[arg(long)]
        k: u32,
        #[arg(long)]
        p: u64,
        #[arg(long)]
        odd: bool,
    },
}

#[derive(Debug, Subcommand)]
pub enum SchottkyCmd {
    /// Random classical Schottky group with certified ping-pong caps.
    Random {
        #[arg(long)]
        genus: usize,
        #[arg(long)]
        dim: usize,
        /// Minimal angular gap between caps.
        #[arg(long, default_value_t = 0.1)]
        separation: f64,
    },
    /// Recomputes the certificate and checks short words are not the identity.
    Certify {
        file: PathBuf,
        #[arg(long, default_value_t = 6)]
        maxlen: usize,
    },
    /// Nested caps approximating the limit set. With --out, writes a CSV with
    /// one row per cap: word, center components, angular radius.
    Limitset {
        file: PathBuf,
        #[arg(long, default_value_t = 4)]
        depth: usize,
    },
}
