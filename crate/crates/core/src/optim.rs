//! Adam with L2 on weight matrices, global-norm clipping and parameter
//! averaging.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::Gradients;
use crate::math;
use crate::params::{Param, ParamKind, ParamStore};
use crate::tensor::Tensor;

/// Scales every gradient by `threshold / ‖g‖` when the global L2 norm over
/// all parameters exceeds `threshold`. Returns the norm before clipping.
pub fn clip_gradients(grads: &mut Gradients, threshold: f64) -> f64 {
    let norm = grads.global_norm();
    if norm > threshold && threshold > 0.0 {
        let scale = threshold / norm;
        for (_, g) in grads.iter_mut() {
            g.data_mut().iter_mut().for_each(|v| *v *= scale);
        }
    }
    norm
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// L2 coefficient, applied to [`ParamKind::Weight`] parameters only.
    pub l2: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8, l2: 0.0 }
    }
}

/// First and second moments per parameter.
///
/// Bias correction uses a per-parameter step count, which equals the global
/// call count whenever every parameter takes part in every step. Entity
/// pretraining updates a subset, and the relation parameters must then start
/// with a fresh correction when joint training begins.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub config: AdamConfig,
    first: Vec<Tensor>,
    second: Vec<Tensor>,
    param_steps: Vec<u64>,
    steps: u64,
}

impl AdamState {
    pub fn new(params: &ParamStore, config: AdamConfig) -> Self {
        let zeros: Vec<Tensor> = params
            .iter()
            .map(|(_, p)| Tensor::zeros(p.value.rows(), p.value.cols()))
            .collect();
        AdamState {
            config,
            first: zeros.clone(),
            second: zeros,
            param_steps: alloc::vec![0; params.len()],
            steps: 0,
        }
    }

    /// Number of completed [`AdamState::step`] calls.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn first_moment(&self, index: usize) -> &Tensor {
        &self.first[index]
    }

    pub fn second_moment(&self, index: usize) -> &Tensor {
        &self.second[index]
    }

    /// One Adam update of every parameter accepted by `select`. Parameters
    /// without a gradient entry are treated as having a zero gradient.
    pub fn step(
        &mut self,
        params: &mut ParamStore,
        grads: &Gradients,
        select: impl Fn(&Param) -> bool,
    ) -> Result<()> {
        if params.len() != self.first.len() || grads.len() != params.len() {
            return Err(Error::Shape {
                what: "adam state".into(),
                expected: (self.first.len(), 1),
                found: (params.len(), 1),
            });
        }
        let AdamConfig { learning_rate, beta1, beta2, epsilon, l2 } = self.config;
        self.steps += 1;
        let ids: Vec<_> = params.ids().collect();
        for id in ids {
            let i = id.index();
            let param = params.get(id);
            if !select(param) {
                continue;
            }
            if let Some(g) = grads.get(id) {
                if g.shape() != param.value.shape() {
                    return Err(Error::Shape {
                        what: alloc::format!("gradient of {}", param.name),
                        expected: param.value.shape(),
                        found: g.shape(),
                    });
                }
            }
            let decay = if param.kind == ParamKind::Weight { l2 } else { 0.0 };
            self.param_steps[i] += 1;
            let t = self.param_steps[i];
            let c1 = 1.0 - math::powi(beta1, t);
            let c2 = 1.0 - math::powi(beta2, t);
            let grad = grads.get(id).map(|g| g.data());
            let value = params.value_mut(id).data_mut();
            let m = self.first[i].data_mut();
            let v = self.second[i].data_mut();
            for k in 0..value.len() {
                let g = grad.map_or(0.0, |g| g[k]) + decay * value[k];
                m[k] = beta1 * m[k] + (1.0 - beta1) * g;
                v[k] = beta2 * v[k] + (1.0 - beta2) * g * g;
                let m_hat = m[k] / c1;
                let v_hat = v[k] / c2;
                value[k] -= learning_rate * m_hat / (math::sqrt(v_hat) + epsilon);
            }
        }
        Ok(())
    }
}

/// Running arithmetic mean of parameter snapshots.
#[derive(Clone, Debug)]
pub struct AveragedParams {
    average: Vec<Tensor>,
    count: u64,
}

impl AveragedParams {
    pub fn new(params: &ParamStore) -> Self {
        AveragedParams { average: params.iter().map(|(_, p)| p.value.clone()).collect(), count: 0 }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// Folds in one snapshot: `avg += (params - avg) / n`.
    pub fn update(&mut self, params: &ParamStore) {
        self.count += 1;
        let n = self.count as f64;
        for (avg, (_, p)) in self.average.iter_mut().zip(params.iter()) {
            for (a, v) in avg.data_mut().iter_mut().zip(p.value.data()) {
                *a += (v - *a) / n;
            }
        }
    }

    /// Restarts the mean from the current parameters.
    pub fn reset(&mut self, params: &ParamStore) {
        *self = AveragedParams::new(params);
    }

    pub fn value(&self, index: usize) -> &Tensor {
        &self.average[index]
    }

    /// A copy of `params` holding the averaged values. Before the first
    /// update this is `params` itself.
    pub fn averaged(&self, params: &ParamStore) -> ParamStore {
        let mut out = params.clone();
        if self.count == 0 {
            return out;
        }
        let ids: Vec<_> = out.ids().collect();
        for id in ids {
            *out.value_mut(id) = self.average[id.index()].clone();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{ParamGroup, ParamId};
    use proptest::prelude::*;
    use rand::Rng;

    fn store(kind: ParamKind, values: Vec<f64>) -> (ParamStore, ParamId) {
        let mut s = ParamStore::new();
        let id = s.add("p", kind, ParamGroup::Entity, Tensor::vector(values)).unwrap();
        (s, id)
    }

    #[test]
    fn clip_leaves_small_norm_alone() {
        let (s, id) = store(ParamKind::Weight, vec![0.0, 0.0]);
        let mut g = Gradients::zeros_like(&s);
        g.set(id, Tensor::vector(vec![0.3, 0.4]));
        let norm = clip_gradients(&mut g, 5.0);
        assert!((norm - 0.5).abs() < 1e-15);
        assert_eq!(g.get(id).unwrap().data(), &[0.3, 0.4]);
    }

    #[test]
    fn clip_scales_to_threshold() {
        let (s, id) = store(ParamKind::Weight, vec![0.0, 0.0]);
        let mut g = Gradients::zeros_like(&s);
        g.set(id, Tensor::vector(vec![3.0, 4.0]));
        clip_gradients(&mut g, 1.0);
        let d = g.get(id).unwrap().data();
        assert!((d[0] - 0.6).abs() < 1e-15 && (d[1] - 0.8).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn clip_bounds_norm_and_never_grows(
            a in proptest::collection::vec(-100.0f64..100.0, 1..20),
            b in proptest::collection::vec(-100.0f64..100.0, 1..20),
            threshold in 0.01f64..50.0,
        ) {
            let mut s = ParamStore::new();
            let ia = s.add("a", ParamKind::Weight, ParamGroup::Entity, Tensor::vector(a.clone())).unwrap();
            let ib = s.add("b", ParamKind::Bias, ParamGroup::Entity, Tensor::vector(b.clone())).unwrap();
            let mut g = Gradients::zeros_like(&s);
            g.set(ia, Tensor::vector(a.clone()));
            g.set(ib, Tensor::vector(b.clone()));
            clip_gradients(&mut g, threshold);
            prop_assert!(g.global_norm() <= threshold * (1.0 + 1e-12));
            for (orig, now) in a.iter().chain(&b).zip(g.get(ia).unwrap().data().iter().chain(g.get(ib).unwrap().data())) {
                prop_assert!(now.abs() <= orig.abs());
            }
        }
    }

    #[test]
    fn adam_zero_gradient_is_bit_identical() {
        let (mut s, _) = store(ParamKind::Weight, vec![0.123456789, -7.5, 1e-300]);
        let before = s.clone();
        let mut adam = AdamState::new(&s, AdamConfig { l2: 0.0, ..Default::default() });
        let g = Gradients::zeros_like(&s);
        adam.step(&mut s, &g, |_| true).unwrap();
        assert_eq!(s, before);
        assert_eq!(adam.steps(), 1);
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        let (mut s, id) = store(ParamKind::Weight, vec![1.0, -2.0, 3.0]);
        let mut adam = AdamState::new(&s, AdamConfig { learning_rate: 0.1, ..Default::default() });
        let mut g = Gradients::zeros_like(&s);
        g.set(id, Tensor::vector(vec![1.0; 3]));
        adam.step(&mut s, &g, |_| true).unwrap();
        for (after, before) in s.value(id).data().iter().zip([1.0, -2.0, 3.0]) {
            // m_hat = v_hat = 1, so the update is -lr / (1 + eps)
            assert!((after - before + 0.1).abs() < 1e-8);
        }
    }

    #[test]
    fn adam_l2_applies_to_weights_only() {
        // g_eff = lambda * W = 0.2; the first Adam step normalizes it, so
        // inspect the stored first moment instead: m = (1 - beta1) * 0.2.
        let (mut s, _) = store(ParamKind::Weight, vec![2.0]);
        let mut adam = AdamState::new(&s, AdamConfig { l2: 0.1, ..Default::default() });
        let zero = Gradients::zeros_like(&s);
        adam.step(&mut s, &zero, |_| true).unwrap();
        assert!((adam.first_moment(0).data()[0] - 0.1 * 0.2).abs() < 1e-15);
        assert!(s.value(ParamId(0)).data()[0] < 2.0);

        for kind in [ParamKind::Bias, ParamKind::Embedding] {
            let (mut s, _) = store(kind, vec![2.0]);
            let before = s.clone();
            let mut adam = AdamState::new(&s, AdamConfig { l2: 0.1, ..Default::default() });
            let zero = Gradients::zeros_like(&s);
            adam.step(&mut s, &zero, |_| true).unwrap();
            assert_eq!(s, before);
        }
    }

    #[test]
    fn adam_respects_selection() {
        let mut s = ParamStore::new();
        let a = s.add("a", ParamKind::Weight, ParamGroup::Entity, Tensor::vector(vec![1.0])).unwrap();
        let b = s.add("b", ParamKind::Weight, ParamGroup::Relation, Tensor::vector(vec![1.0])).unwrap();
        let mut g = Gradients::zeros_like(&s);
        g.set(a, Tensor::vector(vec![1.0]));
        g.set(b, Tensor::vector(vec![1.0]));
        let mut adam = AdamState::new(&s, AdamConfig::default());
        adam.step(&mut s, &g, |p| p.group == ParamGroup::Entity).unwrap();
        assert_ne!(s.value(a).data()[0], 1.0);
        assert_eq!(s.value(b).data()[0], 1.0);
    }

    #[test]
    fn averaging_first_call_and_two_snapshots() {
        let (mut s, id) = store(ParamKind::Weight, vec![0.0]);
        let mut avg = AveragedParams::new(&s);
        avg.update(&s);
        assert_eq!(avg.averaged(&s), s);
        s.value_mut(id).data_mut()[0] = 2.0;
        avg.update(&s);
        assert_eq!(avg.value(0).data()[0], 1.0);
    }

    #[test]
    fn averaging_matches_arithmetic_mean() {
        let mut rng = crate::seeded_rng(17);
        let (mut s, id) = store(ParamKind::Weight, vec![0.0; 4]);
        let mut avg = AveragedParams::new(&s);
        let mut sums = [0.0f64; 4];
        for _ in 0..100 {
            for (k, sum) in sums.iter_mut().enumerate() {
                let v: f64 = rng.gen_range(-10.0..10.0);
                s.value_mut(id).data_mut()[k] = v;
                *sum += v;
            }
            avg.update(&s);
        }
        for (k, sum) in sums.iter().enumerate() {
            assert!((avg.value(0).data()[k] - sum / 100.0).abs() <= 1e-12);
        }
    }
}
