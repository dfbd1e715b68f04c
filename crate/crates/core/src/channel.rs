//! Quasi-static fading channel models.
//!
//! Noise is unit-power circularly-symmetric complex Gaussian on every
//! subchannel, and fading coefficients have `E|H|² = 1`, so a subchannel with
//! power `p` and amplitude gain `λ` has SNR `p·λ²`.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::complexmat::{
    complex_gaussian, sample_gaussian_matrix, sample_permutation, svd, CMatrix, PermMatrix,
};
use crate::error::{Error, Result};

/// Default number of channel uses per coherence block for symbol-level runs.
pub const DEFAULT_BLOCK_LENGTH: usize = 1024;

/// Which fading model a block is drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Model {
    /// `subchannels` independent Rayleigh subcarriers.
    Ofdm { subchannels: usize },
    /// `n_b × n_a` i.i.d. complex Gaussian MIMO matrix.
    Mimo { n_a: usize, n_b: usize },
}

impl Model {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Model::Ofdm { subchannels } => {
                if subchannels == 0 || subchannels % 2 != 0 {
                    return Err(Error::OddChannelCount(subchannels));
                }
            }
            Model::Mimo { n_a, n_b } => {
                if n_a == 0 || n_a % 2 != 0 {
                    return Err(Error::OddChannelCount(n_a));
                }
                if n_b == 0 {
                    return Err(Error::InvalidInput("n_b must be at least 1".into()));
                }
            }
        }
        Ok(())
    }

    /// Number of parallel subchannels after reduction (2N).
    pub fn subchannels(&self) -> usize {
        match *self {
            Model::Ofdm { subchannels } => subchannels,
            Model::Mimo { n_a, .. } => n_a,
        }
    }

    pub fn label(&self) -> String {
        match *self {
            Model::Ofdm { subchannels } => format!("OFDM({subchannels})"),
            Model::Mimo { n_a, n_b } => format!("MIMO({n_a},{n_b})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ChannelKind {
    Ofdm,
    Mimo,
}

/// Fading state of one coherence block.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub kind: ChannelKind,
    /// Amplitude gains `|H_l|` for OFDM; empty for MIMO until reduced.
    pub gains: Vec<f64>,
    /// `n_b × n_a` channel matrix, MIMO only.
    pub mimo_matrix: Option<CMatrix>,
    pub n_a: usize,
    pub n_b: usize,
}

/// MIMO channel seen as 2N parallel subchannels through precoding.
#[derive(Debug, Clone)]
pub struct ReducedChannel {
    /// `W = V·P`, the precoder Bob sends to Alice.
    pub precoder: CMatrix,
    pub permutation: PermMatrix,
    /// `λ_{π(l)}` for subchannel `l`.
    pub parallel_gains: Vec<f64>,
    /// `Pᵀ·Ũ` (2N × n_b), applied by Bob to the received block.
    pub bob_postprocessor: CMatrix,
    /// Subchannels with `π(l) ≥ n_b`: zero gain, noise injected by Bob.
    pub dead: Vec<bool>,
    /// Singular values zero-padded to length 2N, non-increasing.
    pub padded_singular_values: Vec<f64>,
}

/// Rayleigh OFDM block: gains `|H_l|` with `H_l ~ CN(0, 1)`.
pub fn sample_ofdm<R: Rng + ?Sized>(n_channels: usize, rng: &mut R) -> Result<ChannelRealization> {
    Model::Ofdm {
        subchannels: n_channels,
    }
    .validate()?;
    let gains = (0..n_channels)
        .map(|_| complex_gaussian(rng).norm())
        .collect();
    Ok(ChannelRealization {
        kind: ChannelKind::Ofdm,
        gains,
        mimo_matrix: None,
        n_a: n_channels,
        n_b: n_channels,
    })
}

/// MIMO block with i.i.d. `CN(0, 1)` entries.
pub fn sample_mimo<R: Rng + ?Sized>(
    n_a: usize,
    n_b: usize,
    rng: &mut R,
) -> Result<ChannelRealization> {
    Model::Mimo { n_a, n_b }.validate()?;
    Ok(ChannelRealization {
        kind: ChannelKind::Mimo,
        gains: Vec::new(),
        mimo_matrix: Some(sample_gaussian_matrix(n_b, n_a, rng)),
        n_a,
        n_b,
    })
}

/// Reduces a MIMO block to parallel subchannels with a uniformly random
/// permutation drawn from `rng`.
pub fn reduce_mimo<R: Rng + ?Sized>(
    ch: &ChannelRealization,
    rng: &mut R,
) -> Result<ReducedChannel> {
    let perm = sample_permutation(ch.n_a, rng);
    reduce_mimo_with_permutation(ch, perm)
}

/// Reduction with a caller-chosen permutation.
pub fn reduce_mimo_with_permutation(
    ch: &ChannelRealization,
    permutation: PermMatrix,
) -> Result<ReducedChannel> {
    let h = match (&ch.kind, &ch.mimo_matrix) {
        (ChannelKind::Mimo, Some(h)) => h,
        _ => {
            return Err(Error::InvalidInput(
                "reduce_mimo needs a MIMO realization".into(),
            ))
        }
    };
    let two_n = ch.n_a;
    if permutation.size() != two_n {
        return Err(Error::LengthMismatch {
            expected: two_n,
            got: permutation.size(),
        });
    }
    let n_b = h.rows();
    let dec = svd(h)?;

    let mut padded = vec![0.0; two_n];
    for (l, &s) in dec.singular_values.iter().enumerate().take(two_n) {
        padded[l] = s;
    }

    // Ũ: first min(n_b, 2N) rows of Uᴴ, zero rows below when n_b < 2N
    let uh = dec.u.adjoint();
    let mut u_tilde = CMatrix::zeros(two_n, n_b);
    for r in 0..two_n.min(n_b) {
        for c in 0..n_b {
            u_tilde[(r, c)] = uh[(r, c)];
        }
    }

    let p = permutation.to_matrix();
    let precoder = dec.v.matmul(&p);
    let bob_postprocessor = p.adjoint().matmul(&u_tilde);
    let parallel_gains = permutation.permute(&padded);
    let dead = (0..two_n).map(|l| permutation.apply(l) >= n_b).collect();

    Ok(ReducedChannel {
        precoder,
        permutation,
        parallel_gains,
        bob_postprocessor,
        dead,
        padded_singular_values: padded,
    })
}

/// `Y_l = g_l·X_l + Z_l` with unit-power complex Gaussian noise.
pub fn apply_parallel<R: Rng + ?Sized>(
    x: &[Vec<Complex64>],
    gains: &[f64],
    rng: &mut R,
) -> Result<Vec<Vec<Complex64>>> {
    if x.len() != gains.len() {
        return Err(Error::LengthMismatch {
            expected: gains.len(),
            got: x.len(),
        });
    }
    let n = x.first().map_or(0, Vec::len);
    if let Some(bad) = x.iter().find(|row| row.len() != n) {
        return Err(Error::LengthMismatch {
            expected: n,
            got: bad.len(),
        });
    }
    Ok(x.iter()
        .zip(gains)
        .map(|(row, &g)| row.iter().map(|&s| s * g + complex_gaussian(rng)).collect())
        .collect())
}

impl ReducedChannel {
    /// Bob's parallel outputs for Alice's subchannel inputs `x` (2N × n),
    /// given replayed receiver noise `noise` (n_b × n) and the noise Bob
    /// injects on dead subchannels (`dead_noise`, 2N × n; only dead rows
    /// are read).
    pub fn transmit_with_noise(
        &self,
        h: &CMatrix,
        x: &CMatrix,
        noise: &CMatrix,
        dead_noise: &CMatrix,
    ) -> CMatrix {
        let tx = self.precoder.matmul(x);
        let mut rx = h.matmul(&tx);
        for r in 0..rx.rows() {
            for c in 0..rx.cols() {
                rx[(r, c)] += noise[(r, c)];
            }
        }
        let mut y = self.bob_postprocessor.matmul(&rx);
        for (l, &is_dead) in self.dead.iter().enumerate() {
            if is_dead {
                for c in 0..y.cols() {
                    y[(l, c)] += dead_noise[(l, c)];
                }
            }
        }
        y
    }

    /// [`ReducedChannel::transmit_with_noise`] with freshly sampled noise.
    pub fn transmit<R: Rng + ?Sized>(&self, h: &CMatrix, x: &CMatrix, rng: &mut R) -> CMatrix {
        let n = x.cols();
        let noise = sample_gaussian_matrix(h.rows(), n, rng);
        let dead_noise = sample_gaussian_matrix(self.dead.len(), n, rng);
        self.transmit_with_noise(h, x, &noise, &dead_noise)
    }

    /// `Pᵀ Ũ H W`, which equals `diag(parallel_gains)`.
    pub fn end_to_end(&self, h: &CMatrix) -> CMatrix {
        self.bob_postprocessor.matmul(h).matmul(&self.precoder)
    }
}

/// Average transmit power per channel use summed over subchannels.
pub fn transmit_power(x: &CMatrix) -> f64 {
    let n = x.cols().max(1);
    x.as_slice().iter().map(|z| z.norm_sqr()).sum::<f64>() / n as f64
}

/// Parallel-channel view of one block: Bob's gains per subchannel and, for
/// MIMO, the reduction Alice's precoder comes from.
#[derive(Debug, Clone)]
pub struct ParallelState {
    pub gains: Vec<f64>,
    pub realization: ChannelRealization,
    pub reduction: Option<ReducedChannel>,
}

/// Samples a block and reduces it. `state_rng` draws the fading state,
/// `perm_rng` Bob's private permutation (MIMO only).
pub fn realize<R1: Rng + ?Sized, R2: Rng + ?Sized>(
    model: Model,
    state_rng: &mut R1,
    perm_rng: &mut R2,
) -> Result<ParallelState> {
    match model {
        Model::Ofdm { subchannels } => {
            let realization = sample_ofdm(subchannels, state_rng)?;
            Ok(ParallelState {
                gains: realization.gains.clone(),
                realization,
                reduction: None,
            })
        }
        Model::Mimo { n_a, n_b } => {
            let realization = sample_mimo(n_a, n_b, state_rng)?;
            let red = reduce_mimo(&realization, perm_rng)?;
            Ok(ParallelState {
                gains: red.parallel_gains.clone(),
                realization,
                reduction: Some(red),
            })
        }
    }
}

/// Sorted (non-increasing) zero-padded gains of a block, without sampling a
/// permutation. Pairing and allocation depend only on these.
pub fn sorted_gains<R: Rng + ?Sized>(model: Model, rng: &mut R) -> Result<Vec<f64>> {
    let mut g = match model {
        Model::Ofdm { subchannels } => sample_ofdm(subchannels, rng)?.gains,
        Model::Mimo { n_a, n_b } => {
            let h = sample_gaussian_matrix(n_b, n_a, rng);
            let mut padded = svd(&h)?.singular_values;
            padded.resize(n_a, 0.0);
            padded
        }
    };
    g.sort_by(|a, b| b.total_cmp(a));
    Ok(g)
}
