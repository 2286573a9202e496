use serde::{Deserialize, Serialize};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const STREAM_MUL: u64 = 0xD1B5_4A32_D192_ED03;
const STREAM_ADD: u64 = 0x8CB9_2BA7_2F3D_8DD7;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based generator: word `i` is a pure function of
/// `(master_seed, stream_id, i)`.
///
/// Streams are plain values. Parallel code derives one stream per work item
/// instead of sharing a generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "StreamState", into = "StreamState")]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_id: u64,
    pub counter: u64,
    key: u64,
    spare: Option<f64>,
}

#[derive(Clone, Serialize, Deserialize)]
struct StreamState {
    master_seed: u64,
    stream_id: u64,
    counter: u64,
}

impl From<StreamState> for RngStream {
    fn from(s: StreamState) -> Self {
        let mut r = RngStream::new(s.master_seed, s.stream_id);
        r.counter = s.counter;
        r
    }
}

impl From<RngStream> for StreamState {
    fn from(r: RngStream) -> Self {
        StreamState {
            master_seed: r.master_seed,
            stream_id: r.stream_id,
            counter: r.counter,
        }
    }
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        Self {
            master_seed,
            stream_id,
            counter: 0,
            key: Self::key_for(master_seed, stream_id),
            spare: None,
        }
    }

    fn key_for(master_seed: u64, stream_id: u64) -> u64 {
        mix(master_seed) ^ mix(stream_id.wrapping_mul(STREAM_MUL).wrapping_add(STREAM_ADD))
    }

    /// Independent child stream, e.g. one per trial.
    pub fn substream(&self, id: u64) -> Self {
        Self::new(mix(self.key ^ GOLDEN), id)
    }

    pub fn next_u64(&mut self) -> u64 {
        let word = mix(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)));
        self.counter = self.counter.wrapping_add(1);
        word
    }

    /// Uniform on `[0, 1)` with 53 bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `(0, 1]`.
    fn next_open_f64(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform index in `0..n`.
    pub fn next_below(&mut self, n: u64) -> u64 {
        assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }

    /// Standard normal draw (Box–Muller, second variate cached).
    pub fn next_gaussian(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.next_open_f64();
        let u2 = self.next_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        let th = std::f64::consts::TAU * u2;
        self.spare = Some(r * th.sin());
        r * th.cos()
    }

    pub fn fill_gaussian(&mut self, out: &mut [f64], scale: f64) {
        for v in out {
            *v = scale * self.next_gaussian();
        }
    }
}

impl Default for RngStream {
    fn default() -> Self {
        Self::new(0, 0)
    }
}

/// `d` i.i.d. `N(0, scale²)` draws.
pub fn gaussian_vector(rng: &mut RngStream, d: usize, scale: f64) -> Vec<f64> {
    assert!(scale >= 0.0, "scale must be nonnegative");
    let mut v = vec![0.0; d];
    rng.fill_gaussian(&mut v, scale);
    v
}

/// Uniform point in the closed unit ball of `R^d`.
pub fn uniform_in_ball(rng: &mut RngStream, d: usize) -> Vec<f64> {
    let mut v = gaussian_vector(rng, d, 1.0);
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let r = rng.next_f64().powf(1.0 / d as f64);
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x *= r / norm);
    }
    v
}

/// Uniform point on the unit sphere of `R^d`.
pub fn unit_vector(rng: &mut RngStream, d: usize) -> Vec<f64> {
    loop {
        let mut v = gaussian_vector(rng, d, 1.0);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            v.iter_mut().for_each(|x| *x /= norm);
            return v;
        }
    }
}
