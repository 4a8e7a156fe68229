use super::data::{GammaData, PhiData};
use crate::dataset::distance;
use crate::models::{GammaNet, LstmPosNet};
use crate::nn::{rmse_loss, Param};

/// Indexable training items with a position on their episode timeline.
pub trait TrainData {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(position, count)` of item `i` on its episode's timeline.
    fn timeline(&self, i: usize) -> (usize, usize);
}

impl TrainData for GammaData {
    fn len(&self) -> usize {
        self.labels.len()
    }

    fn timeline(&self, i: usize) -> (usize, usize) {
        self.timeline[i]
    }
}

impl TrainData for PhiData {
    fn len(&self) -> usize {
        self.windows.len()
    }

    fn timeline(&self, i: usize) -> (usize, usize) {
        let (e, end) = self.windows[i];
        (end + 1 - self.h, self.episode_len(e) + 1 - self.h)
    }
}

/// A model that the generic training loops can drive.
pub trait Learner {
    type Data: TrainData;

    /// Zeroes gradients, runs forward and backward on `idx` and returns the
    /// normalised RMSE loss. `seed` drives any training-time randomness.
    fn train_batch(&mut self, data: &Self::Data, idx: &[usize], seed: u64) -> f64;

    /// Squared Euclidean error (m²) of every item in `idx`, inference mode.
    fn squared_errors(&self, data: &Self::Data, idx: &[usize]) -> Vec<f64>;

    fn params(&self) -> Vec<&Param<f64>>;

    fn params_mut(&mut self) -> Vec<&mut Param<f64>>;
}

const EVAL_CHUNK: usize = 256;

impl Learner for GammaNet {
    type Data = GammaData;

    fn train_batch(&mut self, data: &GammaData, idx: &[usize], _seed: u64) -> f64 {
        let d = data.dim;
        let mut x = Vec::with_capacity(idx.len() * d);
        let mut y = Vec::with_capacity(idx.len() * 3);
        for &i in idx {
            x.extend_from_slice(&data.xn[i * d..(i + 1) * d]);
            y.extend_from_slice(&data.yn[i * 3..i * 3 + 3]);
        }
        for p in self.params_mut() {
            p.zero_grad();
        }
        let (out, cache) = self.forward_train(&x, idx.len());
        let (loss, grad) = rmse_loss(&out, &y).expect("non-empty batch");
        self.backward(&cache, &grad);
        loss
    }

    fn squared_errors(&self, data: &GammaData, idx: &[usize]) -> Vec<f64> {
        let d = data.dim;
        let mut out = Vec::with_capacity(idx.len());
        for chunk in idx.chunks(EVAL_CHUNK) {
            let x: Vec<f64> = chunk
                .iter()
                .flat_map(|&i| data.xn[i * d..(i + 1) * d].iter().copied())
                .collect();
            let z = self.forward_normalized(&x, chunk.len());
            for (k, &i) in chunk.iter().enumerate() {
                let p = self.labels.denormalize(&z[k * 3..k * 3 + 3]);
                out.push(distance(&p, &data.labels[i]).powi(2));
            }
        }
        out
    }

    fn params(&self) -> Vec<&Param<f64>> {
        GammaNet::params(self)
    }

    fn params_mut(&mut self) -> Vec<&mut Param<f64>> {
        GammaNet::params_mut(self)
    }
}

impl Learner for LstmPosNet {
    type Data = PhiData;

    fn train_batch(&mut self, data: &PhiData, idx: &[usize], seed: u64) -> f64 {
        let mut x = Vec::with_capacity(idx.len() * data.h * data.d);
        let mut y = Vec::with_capacity(idx.len() * 3);
        for &i in idx {
            x.extend_from_slice(data.window(i));
            y.extend_from_slice(&data.targets_n[data.windows[i].0]);
        }
        for p in self.params_mut() {
            p.zero_grad();
        }
        let (out, cache) = self.forward_train(&x, idx.len(), seed);
        let (loss, grad) = rmse_loss(&out, &y).expect("non-empty batch");
        self.backward(&cache, &grad);
        loss
    }

    fn squared_errors(&self, data: &PhiData, idx: &[usize]) -> Vec<f64> {
        let mut out = Vec::with_capacity(idx.len());
        for chunk in idx.chunks(EVAL_CHUNK) {
            let x: Vec<f64> = chunk
                .iter()
                .flat_map(|&i| data.window(i).iter().copied())
                .collect();
            let z = self.forward_normalized(&x, chunk.len());
            for (k, &i) in chunk.iter().enumerate() {
                let p = self.labels.denormalize(&z[k * 3..k * 3 + 3]);
                out.push(distance(&p, &data.targets[data.windows[i].0]).powi(2));
            }
        }
        out
    }

    fn params(&self) -> Vec<&Param<f64>> {
        LstmPosNet::params(self)
    }

    fn params_mut(&mut self) -> Vec<&mut Param<f64>> {
        LstmPosNet::params_mut(self)
    }
}
