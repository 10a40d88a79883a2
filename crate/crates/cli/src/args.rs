use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Spectral-diffusion echo models, Monte Carlo checks, trace integration,
/// global fitting and loss estimation for dielectric TLS echoes.
///
/// Rates given as `*-over-2pi-hz` are ordinary frequencies in Hz; every other
/// rate flag is an angular or Poisson rate in 1/s. Times are in seconds,
/// temperatures in kelvin.
#[derive(Debug, Parser)]
#[command(name = "tlsecho", version, propagate_version = true)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Random seed (64-bit) for every stochastic step.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads: a count or "auto".
    #[arg(long, global = true, env = "TLSECHO_THREADS", default_value = "auto")]
    pub threads: Threads,
    /// File that receives the machine-readable payload.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Payload format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Threads {
    Auto,
    Count(usize),
}

impl std::str::FromStr for Threads {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Threads::Auto);
        }
        match s.parse::<usize>() {
            Ok(n) if n > 0 => Ok(Threads::Count(n)),
            _ => Err(format!("expected a positive count or \"auto\", got {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the analytic echo models and kernels.
    #[command(subcommand)]
    Model(ModelCmd),
    /// Monte Carlo oracles.
    #[command(subcommand)]
    Simulate(SimulateCmd),
    /// Integrate IQ traces.
    #[command(subcommand)]
    Analyze(AnalyzeCmd),
    /// Fit decay datasets.
    #[command(subcommand)]
    Fit(FitCmd),
    /// Loss tangent, quantum efficiency and noise cascade.
    #[command(subcommand)]
    Losses(LossesCmd),
    /// Generate synthetic datasets.
    #[command(subcommand)]
    Synth(SynthCmd),
}

#[derive(Debug, Args)]
pub struct ParamsArgs {
    /// Parameter file (JSON).
    #[arg(long)]
    pub params: PathBuf,
    /// Model variant; defaults to the one stored in the parameter file.
    #[arg(long, value_parser = parse_variant)]
    pub variant: Option<tlsecho::echo::ModelVariant>,
}

fn parse_variant(s: &str) -> Result<tlsecho::echo::ModelVariant, String> {
    s.parse().map_err(|e: tlsecho::Error| e.to_string())
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    /// Write the (x, y) curve as CSV to this path.
    #[arg(long)]
    pub emit_curve: Option<PathBuf>,
    /// Largest x of the emitted curve, in the unit of the swept quantity.
    #[arg(long)]
    pub curve_max: Option<f64>,
    /// Curve points, count.
    #[arg(long, default_value_t = 200)]
    pub curve_points: usize,
}

#[derive(Debug, Subcommand)]
pub enum ModelCmd {
    /// Two-pulse amplitude A₀·exp(−2Γ₂τ − Γ_sd·α). Curve x: 2τ in s.
    Hahn {
        #[command(flatten)]
        params: ParamsArgs,
        /// Temperature, K.
        #[arg(long)]
        temp_k: f64,
        /// Pulse spacing τ, s.
        #[arg(long)]
        tau: f64,
        /// Prefactor A₀, V·s.
        #[arg(long, default_value_t = 1.0)]
        a0: f64,
        #[command(flatten)]
        curve: CurveArgs,
    },
    /// Three-pulse amplitude. Curve x: τ′ in s.
    Stimulated {
        #[command(flatten)]
        params: ParamsArgs,
        /// Temperature, K.
        #[arg(long)]
        temp_k: f64,
        /// Pulse spacing τ, s.
        #[arg(long)]
        tau: f64,
        /// Waiting time τ′, s.
        #[arg(long)]
        tau_prime: f64,
        /// Prefactor A₀, V·s.
        #[arg(long, default_value_t = 1.0)]
        a0: f64,
        /// Multiply β by the high-temperature Γ_sd⁰ instead of Γ_sd(T).
        #[arg(long)]
        high_temperature_rate: bool,
        #[command(flatten)]
        curve: CurveArgs,
    },
    /// Model T₂: the delay 2τ where the two-pulse amplitude reaches 1/e, s.
    T2 {
        #[command(flatten)]
        params: ParamsArgs,
        /// Temperature, K.
        #[arg(long)]
        temp_k: f64,
    },
    /// Model T₁: the τ′ where the stimulated amplitude falls by 1/e, s.
    T1 {
        #[command(flatten)]
        params: ParamsArgs,
        /// Temperature, K.
        #[arg(long)]
        temp_k: f64,
        /// Pulse spacing τ, s.
        #[arg(long)]
        tau: f64,
    },
    /// Two-pulse kernel α(τ, W), s. Curve x: τ in s.
    Alpha {
        /// Pulse spacing τ, s.
        #[arg(long)]
        tau: f64,
        /// Bath flip rate W, 1/s.
        #[arg(long)]
        w: f64,
        #[command(flatten)]
        curve: CurveArgs,
    },
    /// Three-pulse kernel β(τ, τ′, W), s. Curve x: τ′ in s.
    Beta {
        /// Pulse spacing τ, s.
        #[arg(long)]
        tau: f64,
        /// Waiting time τ′, s.
        #[arg(long)]
        tau_prime: f64,
        /// Bath flip rate W, 1/s.
        #[arg(long)]
        w: f64,
        #[command(flatten)]
        curve: CurveArgs,
    },
}

#[derive(Debug, Subcommand)]
pub enum SimulateCmd {
    /// Average |∫h over the first interval − ∫h over the last| for telegraph h(t), s.
    Telegraph {
        /// Flip rate W, 1/s.
        #[arg(long)]
        w: f64,
        /// Pulse spacing τ, s.
        #[arg(long)]
        tau: f64,
        /// Waiting time τ′ of a three-pulse sequence, s; omit for two pulses.
        #[arg(long)]
        tau_prime: Option<f64>,
        /// Histories, count.
        #[arg(long, default_value_t = 100_000)]
        histories: u64,
    },
    /// Explicit dipole-coupled bath; echo amplitude averaged over realizations.
    Ensemble {
        /// Bath density c_B, 1/m³.
        #[arg(long)]
        c_b: f64,
        /// Probed dipole d_A, debye.
        #[arg(long, default_value_t = 3.0)]
        d_a_debye: f64,
        /// Bath dipole d_B, debye.
        #[arg(long, default_value_t = 3.0)]
        d_b_debye: f64,
        /// Relative permittivity ε_r (dimensionless).
        #[arg(long, default_value_t = 2.5)]
        epsilon_r: f64,
        /// Bath spins per realization, count.
        #[arg(long, default_value_t = 500)]
        n_b: usize,
        /// Exclusion radius r_min, m.
        #[arg(long, default_value_t = tlsecho::montecarlo::DEFAULT_R_MIN)]
        r_min: f64,
        /// Flip rate W, 1/s.
        #[arg(long)]
        w: f64,
        /// Pulse spacing τ, s.
        #[arg(long)]
        tau: f64,
        /// Bath realizations, count.
        #[arg(long, default_value_t = 1000)]
        realizations: u64,
    },
    /// Two-pulse echo amplitude versus drive with a spread of Rabi couplings.
    /// Curve x: first-pulse power in W.
    Rabi {
        /// Mean radiative rate Γ_R, 1/s.
        #[arg(long)]
        gamma_r: f64,
        /// First-pulse power, W.
        #[arg(long)]
        p1: f64,
        /// Second-pulse power, W.
        #[arg(long)]
        p2: f64,
        /// Pulse length θ, s.
        #[arg(long)]
        theta: f64,
        /// Drive frequency ω_d/2π, Hz.
        #[arg(long, default_value_t = 7e9)]
        omega_d_over_2pi_hz: f64,
        /// Relative standard deviation of Γ_R (dimensionless).
        #[arg(long, default_value_t = 0.0)]
        spread: f64,
        /// Monte Carlo samples, count.
        #[arg(long, default_value_t = 20_000)]
        samples: u64,
        #[command(flatten)]
        curve: CurveArgs,
    },
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    /// Filter centre µ̄, s (with --sigma and --phi0 instead of --filter-from).
    #[arg(long, requires_all = ["sigma", "phi0"], conflicts_with = "filter_from")]
    pub mu: Option<f64>,
    /// Filter width σ̄, s.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Reference phase φ₀, rad.
    #[arg(long, allow_hyphen_values = true)]
    pub phi0: Option<f64>,
    /// Build the filter from the echo traces of this manifest.
    #[arg(long)]
    pub filter_from: Option<PathBuf>,
    /// Build the filter from only this many highest echoes, count.
    #[arg(long)]
    pub reference_traces: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum AnalyzeCmd {
    /// Matched-filter integral Ī (V·s) of every trace in a set.
    Trace {
        /// Trace-set manifest (JSON).
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        filter: FilterArgs,
    },
    /// Noise σ(Ī) (V·s) from echo-free traces.
    Noise {
        /// Manifest of the echo-free traces.
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        filter: FilterArgs,
    },
    /// ∫(I_b − I_a) dt over a window, V·s.
    Diff {
        /// Reference trace (CSV).
        #[arg(long)]
        a: PathBuf,
        /// Compared trace (CSV).
        #[arg(long)]
        b: PathBuf,
        /// Window start, s.
        #[arg(long, allow_hyphen_values = true)]
        window_start: f64,
        /// Window end, s.
        #[arg(long, allow_hyphen_values = true)]
        window_end: f64,
    },
}

#[derive(Debug, Subcommand)]
pub enum FitCmd {
    /// A₀·exp(−delay/T₂) per series; T₂ in s on the stored delay axis.
    Exp {
        /// Decay dataset (JSON).
        #[arg(long)]
        input: PathBuf,
    },
    /// A·exp(−(delay/T₁)^p) per series; T₁ in s.
    Stretched {
        /// Decay dataset (JSON).
        #[arg(long)]
        input: PathBuf,
    },
    /// Global fit of the shared rates with per-series amplitudes profiled out.
    Global {
        /// Decay dataset (JSON).
        #[arg(long)]
        input: PathBuf,
        /// Model variant: base or refined.
        #[arg(long, value_parser = parse_variant, default_value = "base")]
        variant: tlsecho::echo::ModelVariant,
        /// Starting parameters (JSON); defaults to the D2 preset of the variant.
        #[arg(long)]
        init: Option<PathBuf>,
        /// Starting points, count.
        #[arg(long, default_value_t = 8)]
        multistart: usize,
        /// Weight residuals by the per-point err (V·s) where present.
        #[arg(long)]
        weighted: bool,
        /// Bootstrap resamples, count; 0 disables the bootstrap.
        #[arg(long, default_value_t = 0)]
        bootstrap: usize,
        /// Temperature series per bootstrap subset, count.
        #[arg(long, default_value_t = 18)]
        subset: usize,
    },
}

#[derive(Debug, Args)]
pub struct ChainArgs {
    /// Amplifier cells, count.
    #[arg(long, default_value_t = 2037)]
    pub n_cells: u32,
    /// Net power gain of the chain, dimensionless (linear, not dB).
    #[arg(long, default_value_t = 120.3)]
    pub total_gain: f64,
    /// Shunt capacitance per cell, F.
    #[arg(long, default_value_t = tlsecho::loss::DEFAULT_CAPACITANCE)]
    pub capacitance: f64,
    /// Line impedance Z₀, Ω.
    #[arg(long, default_value_t = tlsecho::loss::DEFAULT_Z0)]
    pub z0: f64,
    /// Signal frequency ω/2π, Hz.
    #[arg(long, default_value_t = 7e9)]
    pub omega_over_2pi_hz: f64,
    /// Loss tangent tan δ (dimensionless).
    #[arg(long)]
    pub tan_delta: f64,
}

#[derive(Debug, Subcommand)]
pub enum LossesCmd {
    /// Loss tangent from spectral-diffusion rates or from TLS density.
    Tandelta {
        /// Parameter file (JSON) supplying Γ_sd⁰ and ω_B.
        #[arg(long, conflicts_with_all = ["gamma_sd0_over_2pi_hz", "n0"])]
        params: Option<PathBuf>,
        /// Γ_sd⁰/2π, Hz.
        #[arg(long, requires = "omega_b_over_2pi_hz")]
        gamma_sd0_over_2pi_hz: Option<f64>,
        /// ω_B/2π, Hz.
        #[arg(long)]
        omega_b_over_2pi_hz: Option<f64>,
        /// Γ_B/ω_B (dimensionless).
        #[arg(long, default_value_t = 1.0)]
        ratio: f64,
        /// TLS density N₀, 1/(J·m³).
        #[arg(long, requires = "d_a_debye")]
        n0: Option<f64>,
        /// Probed dipole d_A, debye.
        #[arg(long)]
        d_a_debye: Option<f64>,
        /// Relative permittivity ε_r (dimensionless).
        #[arg(long, default_value_t = tlsecho::loss::DEFAULT_EPSILON_R)]
        epsilon_r: f64,
    },
    /// Per-cell attenuation, gain and quantum efficiency, with a capacitance band.
    Efficiency {
        #[command(flatten)]
        chain: ChainArgs,
        /// Lower edge of the capacitance band, F.
        #[arg(long, default_value_t = tlsecho::loss::CAPACITANCE_BAND.0)]
        c_min: f64,
        /// Upper edge of the capacitance band, F.
        #[arg(long, default_value_t = tlsecho::loss::CAPACITANCE_BAND.1)]
        c_max: f64,
    },
    /// Noise propagated through the cell cascade.
    Cascade {
        #[command(flatten)]
        chain: ChainArgs,
        /// Input noise, photons.
        #[arg(long, default_value_t = 0.5)]
        n_input: f64,
    },
}

#[derive(Debug, Subcommand)]
pub enum SynthCmd {
    /// Decay dataset from the model plus Gaussian noise; written to --out.
    Decay {
        #[command(flatten)]
        params: ParamsArgs,
        /// hahn (delays are 2τ) or stimulated (delays are τ′).
        #[arg(long, default_value = "hahn")]
        kind: String,
        /// Comma-separated temperatures, K.
        #[arg(long, value_delimiter = ',', required = true)]
        temps_k: Vec<f64>,
        /// First delay, s.
        #[arg(long)]
        delay_min: f64,
        /// Last delay, s.
        #[arg(long)]
        delay_max: f64,
        /// Delays, count.
        #[arg(long, default_value_t = 52)]
        n_delays: usize,
        /// Fixed τ of a stimulated dataset, s.
        #[arg(long)]
        tau: Option<f64>,
        /// Echo prefactor A₀ at every temperature, V·s.
        #[arg(long)]
        amplitude: f64,
        /// Scale A₀ by tanh(ħω_d/2k_BT) with ω_d/2π given here, Hz.
        #[arg(long)]
        thermal_over_2pi_hz: Option<f64>,
        /// Noise standard deviation, V·s.
        #[arg(long, default_value_t = 0.0)]
        noise_std: f64,
        /// Device label stored in the file.
        #[arg(long, default_value = "synthetic")]
        label: String,
    },
    /// Set of Gaussian echo traces; written as CSV files plus manifest into --out.
    Traces {
        /// Sample period, s.
        #[arg(long)]
        dt: f64,
        /// Record length, s.
        #[arg(long)]
        duration: f64,
        /// Echo peak, V.
        #[arg(long)]
        amplitude: f64,
        /// Echo centre, s.
        #[arg(long)]
        center: f64,
        /// Echo width σ, s.
        #[arg(long)]
        width: f64,
        /// Echo phase, rad.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        phase: f64,
        /// Noise per sample and quadrature, V.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// Traces, count.
        #[arg(long, default_value_t = 10)]
        n_traces: usize,
    },
}
