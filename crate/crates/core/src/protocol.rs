//! Alice/Bob OT sessions over one coherence block.
//!
//! Bob learns the fading state, reduces it to 2N parallel subchannels, pairs
//! them and announces `(W, γ, λ̃, L)` on the noise-free link. Entry `C` of
//! every γ pair is a strong subchannel. Alice, who never learns `C`, sends
//! substring `l` of file `j` on subchannel `γ_l[j]` with a wiretap code at
//! the pair's secrecy rate, so Bob can decode it only from the strong side.
//!
//! Codes are idealized: a transmission is a record of payload, secret rate
//! and randomization rate, and decoding succeeds exactly when the receiving
//! subchannel's capacity covers the total codeword rate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Serialize, Serializer};

use crate::channel::{realize, Model, ParallelState, DEFAULT_BLOCK_LENGTH};
use crate::complexmat::{sample_gaussian_matrix, sample_permutation, CMatrix};
use crate::error::{Error, Result};
use crate::exec::{mix64, substream_seed, Execution};
use crate::harness::format_sig;
use crate::pairing::{
    build_gamma, optimal_pairing_ranked, Choice, GammaAssignment, PairGain, Pairing,
};
use crate::powalloc::{allocate_block, PowerAllocation};
use crate::rates::{capacity, pair_rates, RateReport};
use crate::stats::chi_square_independence;

const GAIN_DIGITS: usize = 12;
// Slack on the decodability check, which compares sums of logarithms.
const DECODE_SLACK: f64 = 1e-9;

const STATE_STREAM: u64 = 1;
const BOB_STREAM: u64 = 2;
const NOISE_STREAM: u64 = 3;
const ALICE_STREAM: u64 = 4;
const AUDIT_STREAM: u64 = 0xA0D1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SessionConfig {
    pub model: Model,
    pub snr_db: f64,
    pub epsilon: f64,
    pub block_length: usize,
    pub seed: u64,
}

impl SessionConfig {
    pub fn new(model: Model, snr_db: f64, seed: u64) -> Self {
        SessionConfig {
            model,
            snr_db,
            epsilon: 0.0,
            block_length: DEFAULT_BLOCK_LENGTH,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.block_length == 0 {
            return Err(Error::InvalidInput(
                "block length must be at least 1".into(),
            ));
        }
        if !self.epsilon.is_finite() || self.epsilon < 0.0 {
            return Err(Error::InvalidInput(format!(
                "epsilon must be ≥ 0, got {}",
                self.epsilon
            )));
        }
        if !self.snr_db.is_finite() {
            return Err(Error::InvalidInput("SNR must be finite".into()));
        }
        Ok(())
    }

    /// Total transmit power `P = 10^(snr_db/10)`.
    pub fn total_power(&self) -> f64 {
        10f64.powf(self.snr_db / 10.0)
    }

    /// Per-block budget `Σ P_l = P/2`.
    pub fn budget(&self) -> f64 {
        self.total_power() / 2.0
    }

    fn stream(&self, tag: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(substream_seed(self.seed, tag, 0))
    }
}

/// How Bob fills in his announcement. Only [`BobBehavior::Compliant`] is
/// the protocol; the other variant exists to check that the privacy audit
/// notices a leak.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum BobBehavior {
    #[default]
    Compliant,
    /// Gains announced in γ order instead of strong-first, which tells Alice
    /// on which side the strong subchannel is.
    GainsInGammaOrder,
}

/// Alice inflating the secret rate of one pair by shrinking its
/// randomization rate; used to exercise the secrecy audit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tamper {
    pub pair: usize,
    pub extra_secret_bits: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct SessionOptions {
    pub bob: BobBehavior,
    pub tamper: Option<Tamper>,
}

fn ser_sig<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&format_sig(*v, GAIN_DIGITS))
}

fn ser_gain_pairs<S: Serializer>(v: &[[f64; 2]], s: S) -> std::result::Result<S::Ok, S::Error> {
    let strs: Vec<[String; 2]> = v
        .iter()
        .map(|p| [format_sig(p[0], GAIN_DIGITS), format_sig(p[1], GAIN_DIGITS)])
        .collect();
    strs.serialize(s)
}

fn ser_precoder<S: Serializer>(m: &Option<CMatrix>, s: S) -> std::result::Result<S::Ok, S::Error> {
    let rows: Option<Vec<Vec<[String; 2]>>> = m.as_ref().map(|m| {
        (0..m.rows())
            .map(|r| {
                (0..m.cols())
                    .map(|c| {
                        let z = m[(r, c)];
                        [format_sig(z.re, GAIN_DIGITS), format_sig(z.im, GAIN_DIGITS)]
                    })
                    .collect()
            })
            .collect()
    });
    rows.serialize(s)
}

/// Bob's single noise-free message: everything Alice ever sees from him.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BobMessage {
    /// `W = V·P`, MIMO only.
    #[serde(serialize_with = "ser_precoder")]
    pub precoder: Option<CMatrix>,
    pub gamma: GammaAssignment,
    /// Per-pair gains `(λ, λ')`, strong first.
    #[serde(serialize_with = "ser_gain_pairs")]
    pub gain_pairs: Vec<[f64; 2]>,
    pub lengths: Vec<usize>,
}

impl BobMessage {
    /// The message Bob would have sent with the other choice bit, assuming
    /// he follows the protocol: γ transposed and nothing else.
    pub fn transposed(&self) -> BobMessage {
        BobMessage {
            gamma: self.gamma.transposed(),
            ..self.clone()
        }
    }

    /// `(λ, λ')` per pair as Alice reads them; order within a pair is ignored.
    pub fn pair_gains(&self) -> Vec<PairGain> {
        self.gain_pairs
            .iter()
            .map(|&[a, b]| PairGain {
                strong: a.max(b),
                weak: a.min(b),
            })
            .collect()
    }
}

/// One wiretap-coded block sent on a subchannel.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Transmission {
    pub subchannel: usize,
    pub pair: usize,
    pub file: usize,
    #[serde(serialize_with = "ser_sig")]
    pub power: f64,
    #[serde(serialize_with = "ser_sig")]
    pub secret_rate: f64,
    #[serde(serialize_with = "ser_sig")]
    pub randomization_rate: f64,
    pub secret_bits: usize,
    #[serde(skip)]
    payload: Vec<bool>,
}

impl Transmission {
    fn codeword_rate(&self) -> f64 {
        self.secret_rate + self.randomization_rate
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Transcript {
    pub bob_to_alice: BobMessage,
    pub alice_to_bob: Vec<Transmission>,
    pub noise_free_round_count: usize,
}

impl Transcript {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("transcript serializes")
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SessionResult {
    #[serde(skip)]
    pub decoded: Vec<bool>,
    pub decode_success: bool,
    /// Bits per channel use of the unchosen file Bob could learn.
    pub leakage_bits_other_file: f64,
    pub transcript: Transcript,
    pub rate_bits_per_use: f64,
    pub rates: RateReport,
    pub allocation: PowerAllocation,
    pub choice: Choice,
    /// Bob's gain on every subchannel.
    pub bob_gains: Vec<f64>,
    /// Whether Bob could decode the unchosen file from the weak side.
    pub other_file_decodable: bool,
    /// For MIMO blocks with dead subchannels: largest deviation of a dead
    /// output from the noise Bob injected there, from a symbol-level run.
    pub null_space_residual: Option<f64>,
}

/// Bob after observing the channel.
#[derive(Debug, Clone)]
pub struct Bob {
    choice: Choice,
    state: ParallelState,
    pairing: Pairing,
    behavior: BobBehavior,
}

impl Bob {
    pub fn observe(cfg: &SessionConfig, choice: Choice, behavior: BobBehavior) -> Result<Bob> {
        cfg.validate()?;
        let mut state_rng = cfg.stream(STATE_STREAM);
        let mut perm_rng = cfg.stream(BOB_STREAM);
        let state = realize(cfg.model, &mut state_rng, &mut perm_rng)?;
        // ties are broken by the singular-value rank π(l), which is as
        // private as π itself; OFDM gains tie with probability zero but get
        // a random rank all the same
        let rank = match &state.reduction {
            Some(red) => red.permutation.mapping().to_vec(),
            None => sample_permutation(state.gains.len(), &mut perm_rng)
                .mapping()
                .to_vec(),
        };
        let pairing = optimal_pairing_ranked(&state.gains, &rank)?;
        Ok(Bob {
            choice,
            state,
            pairing,
            behavior,
        })
    }

    pub fn gains(&self) -> &[f64] {
        &self.state.gains
    }

    pub fn state(&self) -> &ParallelState {
        &self.state
    }

    pub fn announce(&self, cfg: &SessionConfig) -> Result<BobMessage> {
        let gamma = build_gamma(&self.pairing, self.choice);
        let g = &self.state.gains;
        let gain_pairs: Vec<[f64; 2]> = match self.behavior {
            BobBehavior::Compliant => self
                .pairing
                .pair_gains(g)
                .iter()
                .map(|p| [p.strong, p.weak])
                .collect(),
            BobBehavior::GainsInGammaOrder => {
                gamma.pairs.iter().map(|&[a, b]| [g[a], g[b]]).collect()
            }
        };
        let mut msg = BobMessage {
            precoder: self.state.reduction.as_ref().map(|r| r.precoder.clone()),
            gamma,
            gain_pairs,
            lengths: Vec::new(),
        };
        let (_, rates) = common_rates(cfg, &msg.pair_gains())?;
        msg.lengths = rates.secret_lengths(cfg.block_length);
        Ok(msg)
    }

    /// Decodes the chosen file from the strong subchannels.
    fn decode(&self, tx: &[Transmission]) -> (Vec<bool>, bool) {
        let mut out = Vec::new();
        let mut ok = true;
        let mut by_pair: Vec<&Transmission> = tx
            .iter()
            .filter(|t| t.file == self.choice.index())
            .collect();
        by_pair.sort_by_key(|t| t.pair);
        for t in by_pair {
            if decodable(t, self.state.gains[t.subchannel]) {
                out.extend_from_slice(&t.payload);
            } else {
                ok = false;
            }
        }
        (out, ok)
    }
}

fn decodable(t: &Transmission, gain: f64) -> bool {
    t.codeword_rate() <= capacity(t.power * gain * gain) + DECODE_SLACK
}

/// Allocation and rates both parties derive from the announced gains.
fn common_rates(cfg: &SessionConfig, pairs: &[PairGain]) -> Result<(PowerAllocation, RateReport)> {
    let alloc = allocate_block(pairs, cfg.budget())?;
    let rates = pair_rates(pairs, &alloc, cfg.epsilon)?;
    Ok((alloc, rates))
}

/// Alice after receiving Bob's message.
#[derive(Debug, Clone)]
pub struct Alice {
    pairs: Vec<PairGain>,
    gamma: GammaAssignment,
    allocation: PowerAllocation,
    rates: RateReport,
    lengths: Vec<usize>,
}

impl Alice {
    pub fn receive(cfg: &SessionConfig, msg: &BobMessage) -> Result<Alice> {
        let pairs = msg.pair_gains();
        if msg.gamma.pairs.len() != pairs.len() {
            return Err(Error::LengthMismatch {
                expected: pairs.len(),
                got: msg.gamma.pairs.len(),
            });
        }
        let (allocation, rates) = common_rates(cfg, &pairs)?;
        let lengths = rates.secret_lengths(cfg.block_length);
        if lengths != msg.lengths {
            return Err(Error::InvalidInput(
                "announced lengths disagree with the rates".into(),
            ));
        }
        Ok(Alice {
            pairs,
            gamma: msg.gamma.clone(),
            allocation,
            rates,
            lengths,
        })
    }

    pub fn total_length(&self) -> usize {
        self.lengths.iter().sum()
    }

    /// Wiretap-encodes substring `l` of each file onto `γ_l[j]`.
    pub fn transmit(
        &self,
        k0: &[bool],
        k1: &[bool],
        tamper: Option<Tamper>,
    ) -> Result<Vec<Transmission>> {
        let need = self.total_length();
        for k in [k0, k1] {
            if k.len() < need {
                return Err(Error::FileTooShort {
                    needed: need,
                    got: k.len(),
                });
            }
        }
        let mut out = Vec::with_capacity(2 * self.pairs.len());
        let mut offset = 0;
        for (l, (&len, g)) in self.lengths.iter().zip(&self.pairs).enumerate() {
            let p = self.allocation.per_pair[l];
            let mut secret = self.rates.per_pair_bits[l];
            let mut randomization = capacity(p * g.weak * g.weak);
            if let Some(t) = tamper.filter(|t| t.pair == l) {
                secret += t.extra_secret_bits;
                randomization = (randomization - t.extra_secret_bits).max(0.0);
            }
            for (j, file) in [k0, k1].into_iter().enumerate() {
                out.push(Transmission {
                    subchannel: self.gamma.pairs[l][j],
                    pair: l,
                    file: j,
                    power: p,
                    secret_rate: secret,
                    randomization_rate: randomization,
                    secret_bits: len,
                    payload: file[offset..offset + len].to_vec(),
                });
            }
            offset += len;
        }
        Ok(out)
    }
}

/// What Bob can learn about the unchosen file: per pair, the part of the
/// secret rate not hidden by the randomization rate on his weak subchannel.
pub fn audit_bob_secrecy(result: &SessionResult) -> f64 {
    other_file_leakage(
        &result.transcript.alice_to_bob,
        &result.bob_gains,
        result.choice,
    )
}

fn other_file_leakage(tx: &[Transmission], bob_gains: &[f64], c: Choice) -> f64 {
    tx.iter()
        .filter(|t| t.file != c.index())
        .map(|t| {
            let g = bob_gains[t.subchannel];
            let weak_cap = capacity(t.power * g * g);
            (weak_cap - t.randomization_rate)
                .min(t.secret_rate)
                .max(0.0)
        })
        .sum()
}

/// Bob's announcement for `(cfg, c)` without running the rest of the session.
pub fn announce(cfg: &SessionConfig, c: Choice, behavior: BobBehavior) -> Result<BobMessage> {
    Bob::observe(cfg, c, behavior)?.announce(cfg)
}

pub fn run_session(
    cfg: &SessionConfig,
    k0: &[bool],
    k1: &[bool],
    c: Choice,
) -> Result<SessionResult> {
    run_session_with(cfg, k0, k1, c, SessionOptions::default())
}

pub fn run_session_with(
    cfg: &SessionConfig,
    k0: &[bool],
    k1: &[bool],
    c: Choice,
    opts: SessionOptions,
) -> Result<SessionResult> {
    let bob = Bob::observe(cfg, c, opts.bob)?;
    let msg = bob.announce(cfg)?;
    let alice = Alice::receive(cfg, &msg)?;
    let tx = alice.transmit(k0, k1, opts.tamper)?;

    let (decoded, decode_success) = bob.decode(&tx);
    let leakage = other_file_leakage(&tx, bob.gains(), c);
    let other_file_decodable = tx
        .iter()
        .filter(|t| t.file != c.index() && t.secret_bits > 0)
        .all(|t| decodable(t, bob.gains()[t.subchannel]))
        && tx.iter().any(|t| t.file != c.index() && t.secret_bits > 0);
    let null_space_residual = symbol_level_check(cfg, &bob, &alice)?;

    Ok(SessionResult {
        decoded,
        decode_success,
        leakage_bits_other_file: leakage,
        rate_bits_per_use: alice.rates.total_bits,
        rates: alice.rates.clone(),
        allocation: alice.allocation.clone(),
        choice: c,
        bob_gains: bob.gains().to_vec(),
        other_file_decodable,
        null_space_residual,
        transcript: Transcript {
            bob_to_alice: msg,
            alice_to_bob: tx,
            noise_free_round_count: 1,
        },
    })
}

/// Pushes Gaussian symbols through the precoded MIMO channel and measures
/// how much of Alice's signal shows up on the dead subchannels.
fn symbol_level_check(cfg: &SessionConfig, bob: &Bob, alice: &Alice) -> Result<Option<f64>> {
    let (Some(red), Some(h)) = (&bob.state.reduction, &bob.state.realization.mimo_matrix) else {
        return Ok(None);
    };
    if !red.dead.iter().any(|&d| d) {
        return Ok(None);
    }
    let two_n = red.dead.len();
    let n = cfg.block_length;
    let mut power = vec![0.0; two_n];
    for (l, pair) in alice.gamma.pairs.iter().enumerate() {
        for &s in pair {
            power[s] = alice.allocation.per_pair[l];
        }
    }
    let mut alice_rng = cfg.stream(ALICE_STREAM);
    let mut x = sample_gaussian_matrix(two_n, n, &mut alice_rng);
    for (r, &p) in power.iter().enumerate() {
        for c in 0..n {
            x[(r, c)] *= p.sqrt();
        }
    }
    let mut noise_rng = cfg.stream(NOISE_STREAM);
    let noise = sample_gaussian_matrix(h.rows(), n, &mut noise_rng);
    let dead_noise = sample_gaussian_matrix(two_n, n, &mut noise_rng);
    let y = red.transmit_with_noise(h, &x, &noise, &dead_noise);
    let mut worst: f64 = 0.0;
    for (l, &d) in red.dead.iter().enumerate() {
        if d {
            for c in 0..n {
                worst = worst.max((y[(l, c)] - dead_noise[(l, c)]).norm());
            }
        }
    }
    Ok(Some(worst))
}

/// Uniformly random bit-string of length `len`.
pub fn random_file<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<bool> {
    (0..len).map(|_| rng.random()).collect()
}

/// Runs a session with random files just long enough for the block.
pub fn run_random_session(
    cfg: &SessionConfig,
    c: Choice,
    opts: SessionOptions,
) -> Result<(SessionResult, [Vec<bool>; 2])> {
    let msg = announce(cfg, c, opts.bob)?;
    let need: usize = msg.lengths.iter().sum();
    let mut rng = ChaCha8Rng::seed_from_u64(substream_seed(cfg.seed, ALICE_STREAM, 1));
    let files = [random_file(need, &mut rng), random_file(need, &mut rng)];
    let res = run_session_with(cfg, &files[0], &files[1], c, opts)?;
    Ok((res, files))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureTest {
    pub name: String,
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrivacyReport {
    pub trials: usize,
    pub features: Vec<FeatureTest>,
    /// Bonferroni-combined p-value over all features.
    pub p_value: f64,
    /// Trials where the C=1 message is not the γ-transposed C=0 message.
    pub structural_mismatches: usize,
    /// Fraction of `C = 0` trials whose first γ entry is subchannel 0.
    pub first_entry_zero_given_c0: f64,
    pub c0_trials: usize,
    pub violation: bool,
}

/// Significance level below which the audit reports a violation.
pub const AUDIT_ALPHA: f64 = 1e-3;

const PAIR_GAIN_BINS: [f64; 4] = [0.5, 1.0, 2.0, 4.0];
const PRECODER_BINS: [f64; 3] = [0.25, 0.5, 0.75];

fn bin(x: f64, edges: &[f64]) -> usize {
    edges.iter().take_while(|&&e| x >= e).count()
}

fn features(msg: &BobMessage) -> Vec<(&'static str, usize)> {
    let orientation = msg
        .gamma
        .pairs
        .iter()
        .take(8)
        .enumerate()
        .fold(0usize, |acc, (l, &[a, b])| acc | (usize::from(a < b) << l));
    let first = msg.gain_pairs[0];
    let mut f = vec![
        ("gamma_orientation", orientation),
        ("gamma_first_entry", msg.gamma.pairs[0][0]),
        ("first_gain_bin", bin(first[0] * first[0], &PAIR_GAIN_BINS)),
        ("gain_order", usize::from(first[0] >= first[1])),
    ];
    if let Some(w) = &msg.precoder {
        f.push(("precoder_bin", bin(w[(0, 0)].norm_sqr(), &PRECODER_BINS)));
    }
    f
}

struct AuditObservation {
    choice: Choice,
    features: Vec<(&'static str, usize)>,
    structural_ok: bool,
}

/// Honest-but-curious Alice: chi-square tests of everything she sees
/// against the choice bit, plus the exact check that flipping `C` on the
/// same randomness only transposes γ.
pub fn audit_alice_privacy(
    cfg: &SessionConfig,
    trials: usize,
    exec: Execution,
) -> Result<PrivacyReport> {
    audit_alice_privacy_with(cfg, trials, BobBehavior::Compliant, exec)
}

pub fn audit_alice_privacy_with(
    cfg: &SessionConfig,
    trials: usize,
    behavior: BobBehavior,
    exec: Execution,
) -> Result<PrivacyReport> {
    cfg.validate()?;
    if trials < 10_000 {
        return Err(Error::InvalidInput(format!(
            "privacy audit needs at least 10^4 trials, got {trials}"
        )));
    }
    let obs = exec.map(trials, |i| -> Result<AuditObservation> {
        let seed = substream_seed(cfg.seed, AUDIT_STREAM, i as u64);
        let trial_cfg = SessionConfig { seed, ..*cfg };
        let m0 = announce(&trial_cfg, Choice::Zero, behavior)?;
        let m1 = announce(&trial_cfg, Choice::One, behavior)?;
        let structural_ok = m1 == m0.transposed();
        let choice = Choice::from_bit(mix64(seed ^ AUDIT_STREAM) & 1 == 1);
        let seen = if choice == Choice::Zero { &m0 } else { &m1 };
        Ok(AuditObservation {
            choice,
            features: features(seen),
            structural_ok,
        })
    });

    let mut names: Vec<&'static str> = Vec::new();
    let mut tables: Vec<Vec<Vec<u64>>> = Vec::new();
    let mut mismatches = 0;
    let (mut c0, mut c0_first_zero) = (0usize, 0usize);
    for o in obs {
        let o = o?;
        if !o.structural_ok {
            mismatches += 1;
        }
        for (k, &(name, v)) in o.features.iter().enumerate() {
            if k == names.len() {
                names.push(name);
                tables.push(Vec::new());
            }
            let t = &mut tables[k];
            if t.len() <= v {
                t.resize(v + 1, vec![0, 0]);
            }
            t[v][o.choice.index()] += 1;
        }
        if o.choice == Choice::Zero {
            c0 += 1;
            if o.features[1].1 == 0 {
                c0_first_zero += 1;
            }
        }
    }

    let features: Vec<FeatureTest> = names
        .iter()
        .zip(&tables)
        .map(|(name, t)| {
            let o = chi_square_independence(t);
            FeatureTest {
                name: name.to_string(),
                statistic: o.statistic,
                dof: o.dof,
                p_value: o.p_value,
            }
        })
        .collect();
    let min_p = features.iter().map(|f| f.p_value).fold(1.0, f64::min);
    let p_value = (min_p * features.len() as f64).min(1.0);
    Ok(PrivacyReport {
        trials,
        p_value,
        structural_mismatches: mismatches,
        first_entry_zero_given_c0: c0_first_zero as f64 / c0.max(1) as f64,
        c0_trials: c0,
        violation: p_value < AUDIT_ALPHA || mismatches > 0,
        features,
    })
}
