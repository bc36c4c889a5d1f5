//! Parameter sets of the three figure experiments.

use super::config::{FactorConfig, GridAxis, ModelConfig, Normalization, NumericsConfig, OutputConfig, RunConfig};
use crate::averaging::Correlations;
use crate::mc::ScaleConvention;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    Figure1,
    Figure2,
    Figure3,
}

/// Which side of a figure: fast factor only or slow factor only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Variant {
    #[default]
    Fast,
    Slow,
}

fn factors(sigma: f64, variant: Variant, beta: f64, g: f64, z: f64, omega: f64) -> FactorConfig {
    let fast = variant == Variant::Fast;
    FactorConfig {
        sigma,
        fast_beta: fast.then_some(beta),
        slow_g: (!fast).then_some(g),
        y: 0.0,
        z: if fast { 0.0 } else { z },
        omega,
        corr: Correlations { xy: if fast { -0.5 } else { 0.0 }, xz: if fast { 0.0 } else { -0.5 }, yz: 0.0 },
        epsilon: 0.01,
        delta: 0.01,
        normalization: Normalization::Verbatim,
        scaling: ScaleConvention::Generator,
    }
}

pub fn preset(p: Preset, variant: Variant) -> RunConfig {
    let tag = match variant {
        Variant::Fast => "fast",
        Variant::Slow => "slow",
    };
    let mut assumptions = Vec::new();
    let (name, model, factors, output) = match p {
        Preset::Figure1 => (
            "figure1",
            ModelConfig::Barrier { rate: 0.05, lower: 1.5, upper: 2.5, strike: 2.0 },
            factors(0.34, variant, 1.0, 2.0, 2.0, 0.0),
            OutputConfig {
                path: None,
                axis: GridAxis::Spot,
                grid: (1..20).map(|i| 1.5 + 0.05 * i as f64).collect(),
                t: 1.0 / 12.0,
                x: 2.0,
            },
        ),
        Preset::Figure2 => {
            assumptions.push("kappa=1 assumed".to_string());
            let omega = match variant {
                Variant::Fast => 0.1 * 0.25f64.exp(),
                Variant::Slow => 0.1,
            };
            (
                "figure2",
                ModelConfig::Vasicek { kappa: 1.0, theta: 0.05 },
                factors(0.02, variant, 1.0, 1.0, 1.0, omega),
                OutputConfig {
                    path: None,
                    axis: GridAxis::Maturity,
                    grid: (1..=20).map(|i| 0.25 * i as f64).collect(),
                    t: 1.0,
                    x: 0.03,
                },
            )
        }
        Preset::Figure3 => (
            "figure3",
            ModelConfig::Jdcev { mu: 0.05, c: 0.5, eta: -1.0, strike: 50.0 },
            factors(10.0, variant, 2.0, 2.0, 2.0, 0.0),
            OutputConfig { path: None, axis: GridAxis::Strike, grid: (0..9).map(|i| 30.0 + 5.0 * i as f64).collect(), t: 1.0, x: 50.0 },
        ),
    };
    RunConfig { name: format!("{name}-{tag}"), model, factors, numerics: NumericsConfig::default(), output, assumptions }
}
