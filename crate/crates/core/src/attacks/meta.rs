use nalgebra::{DMatrix, DVector};

use super::corpus::{attack_features, ProbeSet, ShadowCorpus};
use super::{AttackMode, AttackTask};
use crate::error::{Error, Result};
use crate::game::Adversary;
use crate::nets::mlp::{format_line, parse_line};
use crate::nets::MlpModel;

/// Default L2 strength on the standardised meta-model weights.
pub const DEFAULT_L2: f64 = 1.0;

/// Linear meta-model on standardised attack features: logistic for
/// classification, ridge regression clamped to `[0, 1]` for regression.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaModel {
    pub mode: AttackMode,
    pub task: AttackTask,
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub probe_set: Option<ProbeSet>,
    /// Layer dims of the shadow models; empty when unknown.
    pub architecture: Vec<usize>,
    pub family_fingerprint: u64,
    pub trainer_fingerprint: u64,
    pub reserved_streams: Vec<u64>,
}

pub fn train_meta(corpus: &ShadowCorpus) -> Result<MetaModel> {
    train_meta_with(corpus, DEFAULT_L2)
}

pub fn train_meta_with(corpus: &ShadowCorpus, l2: f64) -> Result<MetaModel> {
    if corpus.records.is_empty() {
        return Err(Error::DegenerateCorpus("corpus is empty".into()));
    }
    if !(l2 >= 0.0) {
        return Err(Error::invalid(format!("l2 must be >= 0, got {l2}")));
    }
    let n = corpus.records.len();
    let p = corpus.feature_len();
    let labels: Vec<f64> = corpus.records.iter().map(|r| r.1).collect();
    if corpus.task == AttackTask::Classify {
        if labels.iter().any(|&y| y != 0.0 && y != 1.0) {
            return Err(Error::DegenerateCorpus("classification labels must be 0 or 1".into()));
        }
        let ones = labels.iter().filter(|&&y| y == 1.0).count();
        if ones == 0 || ones == n {
            return Err(Error::DegenerateCorpus("classification corpus has a single class".into()));
        }
    }
    let (means, scales) = standardisation(corpus);
    let z = DMatrix::from_fn(n, p, |i, j| (corpus.records[i].0[j] - means[j]) / scales[j]);
    let (weights, bias) = match corpus.task {
        AttackTask::Classify => fit_logistic(&z, &labels, l2)?,
        AttackTask::Regress => fit_ridge(&z, &labels, l2)?,
    };
    Ok(MetaModel {
        mode: corpus.mode,
        task: corpus.task,
        means,
        scales,
        weights,
        bias,
        probe_set: corpus.probe_set.clone(),
        architecture: corpus.architecture.clone(),
        family_fingerprint: corpus.family_fingerprint,
        trainer_fingerprint: corpus.trainer_fingerprint,
        reserved_streams: corpus.reserved_streams.clone(),
    })
}

fn standardisation(corpus: &ShadowCorpus) -> (Vec<f64>, Vec<f64>) {
    let n = corpus.records.len() as f64;
    let p = corpus.feature_len();
    let mut means = vec![0.0; p];
    for (f, _) in &corpus.records {
        for (m, v) in means.iter_mut().zip(f) {
            *m += v / n;
        }
    }
    let mut scales = vec![0.0; p];
    for (f, _) in &corpus.records {
        for j in 0..p {
            scales[j] += (f[j] - means[j]).powi(2) / n;
        }
    }
    for s in scales.iter_mut() {
        *s = if *s > 1e-24 { s.sqrt() } else { 1.0 };
    }
    (means, scales)
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// L2-penalised logistic regression by Newton's method; the bias is not penalised.
fn fit_logistic(z: &DMatrix<f64>, y: &[f64], l2: f64) -> Result<(Vec<f64>, f64)> {
    let (n, p) = z.shape();
    // augmented design with a trailing column of ones for the bias
    let x = DMatrix::from_fn(n, p + 1, |i, j| if j < p { z[(i, j)] } else { 1.0 });
    let mut beta = DVector::<f64>::zeros(p + 1);
    for _ in 0..100 {
        let eta = &x * &beta;
        let probs: Vec<f64> = eta.iter().map(|&t| sigmoid(t)).collect();
        let mut grad = DVector::<f64>::zeros(p + 1);
        let mut hess = DMatrix::<f64>::zeros(p + 1, p + 1);
        for i in 0..n {
            let row = x.row(i);
            let r = probs[i] - y[i];
            let w = (probs[i] * (1.0 - probs[i])).max(1e-12);
            grad.axpy(r, &row.transpose(), 1.0);
            hess.ger(w, &row.transpose(), &row.transpose(), 1.0);
        }
        for j in 0..p {
            grad[j] += l2 * beta[j];
            hess[(j, j)] += l2;
        }
        hess[(p, p)] += 1e-9;
        let chol = hess
            .cholesky()
            .ok_or_else(|| Error::SingularSystem { reason: "logistic Hessian is not positive definite".into(), condition_number: f64::INFINITY })?;
        let step = chol.solve(&grad);
        beta -= &step;
        if step.amax() < 1e-10 {
            break;
        }
    }
    Ok((beta.rows(0, p).iter().copied().collect(), beta[p]))
}

/// Ridge regression on standardised features; the intercept is the label mean.
fn fit_ridge(z: &DMatrix<f64>, y: &[f64], l2: f64) -> Result<(Vec<f64>, f64)> {
    let (n, p) = z.shape();
    let ybar = y.iter().sum::<f64>() / n as f64;
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - ybar));
    let mut gram = z.transpose() * z;
    for j in 0..p {
        gram[(j, j)] += l2.max(1e-9);
    }
    let rhs = z.transpose() * yc;
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::SingularSystem { reason: "ridge system is not positive definite".into(), condition_number: f64::INFINITY })?;
    Ok((chol.solve(&rhs).iter().copied().collect(), ybar))
}

impl MetaModel {
    /// Raw score for a feature vector: the logit (classify) or the unclamped prediction (regress).
    pub fn score(&self, features: &[f64]) -> Result<f64> {
        if features.len() != self.weights.len() {
            return Err(Error::config(format!(
                "attack features have length {}, meta-model expects {}",
                features.len(),
                self.weights.len()
            )));
        }
        let mut s = self.bias;
        for j in 0..features.len() {
            s += self.weights[j] * (features[j] - self.means[j]) / self.scales[j];
        }
        Ok(s)
    }

    /// Guess for `r` from a feature vector.
    pub fn predict_features(&self, features: &[f64]) -> Result<f64> {
        let s = self.score(features)?;
        Ok(match self.task {
            AttackTask::Classify => {
                if s > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            AttackTask::Regress => s.clamp(0.0, 1.0),
        })
    }

    pub fn to_text(&self) -> String {
        let mode = match self.mode {
            AttackMode::Whitebox => "whitebox",
            AttackMode::Blackbox => "blackbox",
        };
        let task = match self.task {
            AttackTask::Classify => "classify",
            AttackTask::Regress => "regress",
        };
        let arch: Vec<String> = self.architecture.iter().map(|d| d.to_string()).collect();
        let mut out = format!("META {mode} {task} {}\n", self.weights.len());
        out.push_str(&format!("ARCH {}\n", arch.join(" ")));
        out.push_str(&format!("FINGERPRINTS {} {}\n", self.family_fingerprint, self.trainer_fingerprint));
        let streams: Vec<String> = self.reserved_streams.iter().map(|s| s.to_string()).collect();
        out.push_str(&format!("STREAMS {}\n", streams.join(" ")));
        for line in [&self.means, &self.scales, &self.weights] {
            out.push_str(&format_line(line));
            out.push('\n');
        }
        out.push_str(&format_line(&[self.bias]));
        out.push('\n');
        match &self.probe_set {
            None => out.push_str("PROBE none\n"),
            Some(p) => {
                out.push_str(&format!("PROBE {} {} {}\n", p.len(), p.d, p.stream));
                out.push_str(&format_line(&p.rows));
                out.push('\n');
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |what: &str| Error::Parse(format!("meta-model text: {what}"));
        let mut lines = text.lines();
        let mut next = |what: &str| lines.next().ok_or_else(|| bad(&format!("missing {what}")));
        let header: Vec<&str> = next("header")?.split_whitespace().collect();
        if header.len() != 4 || header[0] != "META" {
            return Err(bad("bad header"));
        }
        let mode = match header[1] {
            "whitebox" => AttackMode::Whitebox,
            "blackbox" => AttackMode::Blackbox,
            _ => return Err(bad("unknown mode")),
        };
        let task = match header[2] {
            "classify" => AttackTask::Classify,
            "regress" => AttackTask::Regress,
            _ => return Err(bad("unknown task")),
        };
        let p: usize = header[3].parse().map_err(|_| bad("feature count"))?;
        let tagged = |line: &str, tag: &str| -> Result<Vec<u64>> {
            let mut it = line.split_whitespace();
            if it.next() != Some(tag) {
                return Err(bad(&format!("expected {tag}")));
            }
            it.map(|t| t.parse::<u64>().map_err(|_| bad(tag))).collect()
        };
        let architecture = tagged(next("ARCH")?, "ARCH")?.into_iter().map(|d| d as usize).collect();
        let fps = tagged(next("FINGERPRINTS")?, "FINGERPRINTS")?;
        if fps.len() != 2 {
            return Err(bad("FINGERPRINTS needs two values"));
        }
        let reserved_streams = tagged(next("STREAMS")?, "STREAMS")?;
        let vec_of = |line: &str, what: &str, len: usize| -> Result<Vec<f64>> {
            let v = parse_line(line)?;
            if v.len() != len {
                return Err(bad(&format!("{what} has {} values, expected {len}", v.len())));
            }
            Ok(v)
        };
        let means = vec_of(next("means")?, "means", p)?;
        let scales = vec_of(next("scales")?, "scales", p)?;
        let weights = vec_of(next("weights")?, "weights", p)?;
        let bias = vec_of(next("bias")?, "bias", 1)?[0];
        let probe_header: Vec<&str> = next("PROBE")?.split_whitespace().collect();
        let probe_set = match probe_header.as_slice() {
            ["PROBE", "none"] => None,
            ["PROBE", count, d, stream] => {
                let count: usize = count.parse().map_err(|_| bad("probe count"))?;
                let d: usize = d.parse().map_err(|_| bad("probe width"))?;
                let stream: u64 = stream.parse().map_err(|_| bad("probe stream"))?;
                let rows = vec_of(next("probe rows")?, "probe rows", count * d)?;
                Some(ProbeSet { rows, d, stream })
            }
            _ => return Err(bad("bad PROBE line")),
        };
        Ok(MetaModel {
            mode,
            task,
            means,
            scales,
            weights,
            bias,
            probe_set,
            architecture,
            family_fingerprint: fps[0],
            trainer_fingerprint: fps[1],
            reserved_streams,
        })
    }
}

/// The adversary's guess `r_hat = H(target)`.
pub fn attack(meta: &MetaModel, target: &MlpModel) -> Result<f64> {
    if !meta.architecture.is_empty() && meta.architecture != target.layer_dims() {
        return Err(Error::config(format!(
            "target architecture {:?} does not match shadow architecture {:?}",
            target.layer_dims(),
            meta.architecture
        )));
    }
    let features = attack_features(target, meta.mode, meta.probe_set.as_ref())?;
    meta.predict_features(&features)
}

impl Adversary for MetaModel {
    fn guess(&self, target: &MlpModel) -> Result<f64> {
        attack(self, target)
    }

    fn family_fingerprint(&self) -> Option<u64> {
        (self.family_fingerprint != 0).then_some(self.family_fingerprint)
    }

    fn trainer_fingerprint(&self) -> Option<u64> {
        (self.trainer_fingerprint != 0).then_some(self.trainer_fingerprint)
    }

    fn reserved_streams(&self) -> &[u64] {
        &self.reserved_streams
    }
}
