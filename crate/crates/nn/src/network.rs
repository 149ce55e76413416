//! Stage-2 network: dilated causal convolution encoder, global and local
//! context branches and a per-horizon MLP head.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NnError, Result};
use crate::tape::{Tape, Tensor, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Architecture {
    /// Encoder with global and local contexts feeding the head.
    Encoder,
    /// Head only, fed with the most recent scaled observations.
    Plain,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub history_len: usize,
    pub horizon: usize,
    pub history_features: usize,
    pub future_features: usize,
    /// Head width is `outputs`; for the weighted recombination this is N+1.
    pub outputs: usize,
    pub channels: usize,
    pub dilations: Vec<usize>,
    pub hidden: usize,
    pub architecture: Architecture,
}

impl NetworkConfig {
    pub fn new(history_len: usize, horizon: usize, history_features: usize, future_features: usize, outputs: usize) -> Self {
        Self {
            history_len,
            horizon,
            history_features,
            future_features,
            outputs,
            channels: 32,
            dilations: vec![1, 2, 4],
            hidden: 32,
            architecture: Architecture::Encoder,
        }
    }

    pub fn plain(mut self) -> Self {
        self.architecture = Architecture::Plain;
        self
    }

    /// Number of trailing observations the plain head sees.
    pub fn plain_lookback(&self) -> usize {
        self.history_len.min(14)
    }

    fn validate(&self) -> Result<()> {
        if self.history_len == 0 || self.horizon == 0 || self.outputs == 0 || self.history_features == 0 {
            return Err(NnError::config("network dimensions must be positive"));
        }
        if self.channels == 0 || self.hidden == 0 || self.dilations.is_empty() || self.dilations.contains(&0) {
            return Err(NnError::config("encoder widths and dilations must be positive"));
        }
        Ok(())
    }

    fn head_inputs(&self) -> usize {
        match self.architecture {
            Architecture::Encoder => self.channels + 1 + self.future_features,
            Architecture::Plain => self.plain_lookback() + self.future_features,
        }
    }

    /// `(name, rows, cols, fan_in, fan_out)`; biases have zero fans.
    fn layout(&self) -> Vec<(String, usize, usize, usize, usize)> {
        const TAPS: usize = 2;
        let mut out = Vec::new();
        if self.architecture == Architecture::Encoder {
            let mut cin = self.history_features;
            for (k, _) in self.dilations.iter().enumerate() {
                out.push((format!("conv{k}.w"), TAPS * cin, self.channels, TAPS * cin, self.channels));
                out.push((format!("conv{k}.b"), 1, self.channels, 0, 0));
                cin = self.channels;
            }
            out.push(("global.w".into(), self.channels, self.channels, self.channels, self.channels));
            out.push(("global.b".into(), 1, self.channels, 0, 0));
            let flat = self.history_len * self.channels;
            out.push(("local.w".into(), flat, self.horizon, flat, self.horizon));
            out.push(("local.b".into(), 1, self.horizon, 0, 0));
        }
        let hin = self.head_inputs();
        out.push(("head1.w".into(), hin, self.hidden, hin, self.hidden));
        out.push(("head1.b".into(), 1, self.hidden, 0, 0));
        out.push(("head2.w".into(), self.hidden, self.outputs, 0, 0));
        out.push(("head2.b".into(), 1, self.outputs, 0, 0));
        out
    }
}

/// Inputs of one window, already scaled.
#[derive(Debug, Clone, PartialEq)]
pub struct NetInput {
    /// `[T, history_features]`, first column the scaled observations.
    pub history: Tensor,
    /// `[H, future_features]`.
    pub future: Tensor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub config: NetworkConfig,
    pub names: Vec<String>,
    pub params: Vec<Tensor>,
}

const CHECKPOINT_FORMAT: &str = "wrcast-nn";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Checkpoint<T> {
    format: String,
    version: u32,
    network: Network,
    extra: T,
}

impl Network {
    /// Uniform `±sqrt(6/(fan_in+fan_out))` weights, zero biases and a zero
    /// output layer, so an untrained head emits all zeros.
    pub fn new(config: NetworkConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut names = Vec::new();
        let mut params = Vec::new();
        for (name, rows, cols, fi, fo) in config.layout() {
            let data = if fi + fo == 0 {
                vec![0.0; rows * cols]
            } else {
                let lim = (6.0 / (fi + fo) as f64).sqrt();
                (0..rows * cols).map(|_| rng.gen_range(-lim..=lim)).collect()
            };
            names.push(name);
            params.push(Tensor::new(rows, cols, data)?);
        }
        Ok(Self { config, names, params })
    }

    pub fn zeros(config: NetworkConfig) -> Result<Self> {
        let mut n = Self::new(config, 0)?;
        for p in &mut n.params {
            p.data.iter_mut().for_each(|v| *v = 0.0);
        }
        Ok(n)
    }

    pub fn n_parameters(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    pub fn param(&self, name: &str) -> Option<&Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &self.params[i])
    }

    pub fn param_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.names.iter().position(|n| n == name).map(move |i| &mut self.params[i])
    }

    /// Places every parameter on the tape as a leaf.
    pub fn bind(&self, tape: &mut Tape) -> Vec<Var> {
        self.params.iter().map(|p| tape.leaf(p.clone())).collect()
    }

    fn check_input(&self, input: &NetInput) -> Result<()> {
        let c = &self.config;
        if input.history.shape() != (c.history_len, c.history_features) {
            return Err(NnError::config(format!(
                "history input {:?}, network expects ({}, {})",
                input.history.shape(),
                c.history_len,
                c.history_features
            )));
        }
        if input.future.shape() != (c.horizon, c.future_features) {
            return Err(NnError::config(format!(
                "future input {:?}, network expects ({}, {})",
                input.future.shape(),
                c.horizon,
                c.future_features
            )));
        }
        Ok(())
    }

    /// Records the forward pass; returns the `[H, outputs]` head output.
    pub fn forward(&self, tape: &mut Tape, vars: &[Var], input: &NetInput) -> Result<Var> {
        self.check_input(input)?;
        if vars.len() != self.params.len() {
            return Err(NnError::State("parameters not bound to this tape".into()));
        }
        let c = &self.config;
        let h = c.horizon;
        let mut k = 0;
        let mut next = || {
            k += 1;
            vars[k - 1]
        };
        let future = tape.leaf(input.future.clone());
        let z = match c.architecture {
            Architecture::Encoder => {
                let mut x = tape.leaf(input.history.clone());
                for &d in &c.dilations {
                    let (w, b) = (next(), next());
                    let y = tape.conv1d(x, w, b, d, 2)?;
                    x = tape.relu(y)?;
                }
                let last = tape.slice_rows_last(x)?;
                let (gw, gb) = (next(), next());
                let ga = tape.matmul(last, gw)?;
                let ga = tape.add_row(ga, gb)?;
                let global = tape.relu(ga)?;
                let flat = tape.reshape(x, 1, c.history_len * c.channels)?;
                let (lw, lb) = (next(), next());
                let local = tape.matmul(flat, lw)?;
                let local = tape.add_row(local, lb)?;
                let local = tape.reshape(local, h, 1)?;
                let ones = tape.leaf(Tensor::filled(h, 1, 1.0));
                let global_rows = tape.matmul(ones, global)?;
                tape.concat_cols(&[global_rows, local, future])?
            }
            Architecture::Plain => {
                let lb = c.plain_lookback();
                let recent: Vec<f64> = (c.history_len - lb..c.history_len).map(|t| input.history.get(t, 0)).collect();
                let recent = tape.leaf(Tensor::row_vector(recent));
                let ones = tape.leaf(Tensor::filled(h, 1, 1.0));
                let rows = tape.matmul(ones, recent)?;
                tape.concat_cols(&[rows, future])?
            }
        };
        let (w1, b1, w2, b2) = (next(), next(), next(), next());
        let a = tape.matmul(z, w1)?;
        let a = tape.add_row(a, b1)?;
        let a = tape.relu(a)?;
        let o = tape.matmul(a, w2)?;
        tape.add_row(o, b2)
    }

    /// Forward pass without keeping the tape.
    pub fn predict(&self, input: &NetInput) -> Result<Tensor> {
        let mut tape = Tape::new();
        let vars = self.bind(&mut tape);
        let out = self.forward(&mut tape, &vars, input)?;
        Ok(tape.value(out).clone())
    }

    fn same_layout(&self, other: &Network) -> bool {
        self.names == other.names
            && self
                .params
                .iter()
                .zip(&other.params)
                .all(|(a, b)| a.shape() == b.shape())
    }

    /// Versioned JSON checkpoint carrying `extra` alongside the parameters.
    pub fn save_with<T: Serialize>(&self, path: impl AsRef<Path>, extra: &T) -> Result<()> {
        let ck = Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            network: self.clone(),
            extra,
        };
        let p = path.as_ref();
        let f = std::fs::File::create(p).map_err(|e| NnError::Io {
            path: p.display().to_string(),
            source: e,
        })?;
        serde_json::to_writer(std::io::BufWriter::new(f), &ck)?;
        Ok(())
    }

    pub fn load_with<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<(Self, T)> {
        let p = path.as_ref();
        let f = std::fs::File::open(p).map_err(|e| NnError::Io {
            path: p.display().to_string(),
            source: e,
        })?;
        let ck: Checkpoint<T> = serde_json::from_reader(std::io::BufReader::new(f))?;
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(NnError::Checkpoint(format!(
                "unsupported checkpoint {} v{}",
                ck.format, ck.version
            )));
        }
        let fresh = Network::zeros(ck.network.config.clone())?;
        if !fresh.same_layout(&ck.network) {
            return Err(NnError::Checkpoint("parameter shapes do not match the stored configuration".into()));
        }
        Ok((ck.network, ck.extra))
    }

    /// Replaces the parameters, refusing a different layout.
    pub fn load_params_from(&mut self, other: &Network) -> Result<()> {
        if self.config != other.config || !self.same_layout(other) {
            return Err(NnError::Checkpoint("network layouts differ".into()));
        }
        self.params = other.params.clone();
        Ok(())
    }
}

impl Tape {
    /// Last row of a matrix as `[1, cols]`.
    pub fn slice_rows_last(&mut self, a: Var) -> Result<Var> {
        let (r, c) = self.value(a).shape();
        if r == 0 {
            return Err(NnError::shape("slice_rows_last", "empty input"));
        }
        let flat = self.reshape(a, 1, r * c)?;
        self.slice_cols(flat, (r - 1) * c, r * c)
    }
}
