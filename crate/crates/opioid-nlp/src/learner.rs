//! From-scratch L2-regularized hinge-loss linear classifier.
//!
//! Training is deterministic stochastic sub-gradient descent on the primal
//! objective with step size 1/(lambda*t), seeded shuffling each epoch, and
//! labels encoded +/-1. The bias term is unregularized.

use crate::features::{FeatureVector, Vocabulary};
use crate::{Error, Label, Result};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::Path;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            lambda: 1e-4,
            epochs: 20,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    /// One weight per vocabulary n-gram, then the position weight last.
    pub weights: Vec<f64>,
    pub bias: f64,
    pub vocabulary: Vocabulary,
    pub hyperparameters: Hyperparameters,
    pub format_version: u32,
}

impl LinearModel {
    pub fn ngram_dims(&self) -> usize {
        self.weights.len() - 1
    }

    pub fn position_weight(&self) -> f64 {
        *self.weights.last().unwrap()
    }
}

/// Stratified, seeded, disjoint and exhaustive train/test split over labels;
/// returns sorted index sets into the input slice.
pub fn split_indices(
    labels: &[Label],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..1.0).contains(&train_fraction) || train_fraction <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "train_fraction must be in (0,1), got {train_fraction}"
        )));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(), Vec::new()];
    for (i, label) in labels.iter().enumerate() {
        match label {
            Label::Positive => by_class[0].push(i),
            Label::Negative => by_class[1].push(i),
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in &mut by_class {
        if class.len() < 2 {
            return Err(Error::Degenerate(format!(
                "class with {} examples cannot be split",
                class.len()
            )));
        }
        class.shuffle(&mut rng);
        let n_train = ((class.len() as f64) * train_fraction).floor() as usize;
        let n_train = n_train.clamp(1, class.len() - 1);
        for (rank, &i) in class.iter().enumerate() {
            if rank < n_train {
                train.push(i);
            } else {
                test.push(i);
            }
        }
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// [`split_indices`] applied to labeled feature vectors.
pub fn split_train_test(
    vectors: &[FeatureVector],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<FeatureVector>, Vec<FeatureVector>)> {
    let labels: Vec<Label> = vectors
        .iter()
        .enumerate()
        .map(|(i, v)| {
            v.label
                .ok_or_else(|| Error::InvalidRecord(format!("vector {i} is unlabeled")))
        })
        .collect::<Result<_>>()?;
    let (train, test) = split_indices(&labels, train_fraction, seed)?;
    Ok((
        train.into_iter().map(|i| vectors[i].clone()).collect(),
        test.into_iter().map(|i| vectors[i].clone()).collect(),
    ))
}

fn score_sparse(weights: &[f64], bias: f64, v: &FeatureVector) -> f64 {
    let position_weight = weights[weights.len() - 1];
    let mut s = bias + position_weight * v.position;
    for &i in &v.indices {
        s += weights[i];
    }
    s
}

fn label_sign(label: Label) -> f64 {
    match label {
        Label::Positive => 1.0,
        Label::Negative => -1.0,
    }
}

/// Mean hinge loss plus (lambda/2)*||w||^2 over a set.
pub fn objective(weights: &[f64], bias: f64, lambda: f64, data: &[FeatureVector]) -> f64 {
    let hinge: f64 = data
        .iter()
        .map(|v| {
            let y = label_sign(v.label.expect("labeled"));
            (1.0 - y * score_sparse(weights, bias, v)).max(0.0)
        })
        .sum::<f64>()
        / data.len().max(1) as f64;
    let norm2: f64 = weights.iter().map(|w| w * w).sum();
    hinge + 0.5 * lambda * norm2
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: LinearModel,
    /// Objective value after each epoch.
    pub loss_trace: Vec<f64>,
}

pub fn train(
    train_set: &[FeatureVector],
    vocabulary: Vocabulary,
    hp: Hyperparameters,
) -> Result<TrainOutcome> {
    if train_set.is_empty() {
        return Err(Error::Degenerate("empty training set".into()));
    }
    let has = |l: Label| train_set.iter().any(|v| v.label == Some(l));
    if !has(Label::Positive) || !has(Label::Negative) {
        return Err(Error::Degenerate(
            "training set must contain both classes".into(),
        ));
    }
    for v in train_set {
        if let Some(&i) = v.indices.iter().max() {
            if i >= vocabulary.ngram_dims() {
                return Err(Error::DimensionMismatch {
                    index: i,
                    dims: vocabulary.ngram_dims(),
                });
            }
        }
    }

    let dims = vocabulary.ngram_dims() + 1;
    let mut weights = vec![0.0f64; dims];
    let mut bias = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut loss_trace = Vec::with_capacity(hp.epochs);
    let mut t = 1u64;
    let position_index = dims - 1;

    for epoch in 0..hp.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let v = &train_set[i];
            let y = label_sign(v.label.expect("labeled"));
            let eta = 1.0 / (hp.lambda * t as f64);
            let margin = y * score_sparse(&weights, bias, v);
            // regularization shrink
            let shrink = 1.0 - eta * hp.lambda;
            for w in weights.iter_mut() {
                *w *= shrink;
            }
            if margin < 1.0 {
                for &idx in &v.indices {
                    weights[idx] += eta * y;
                }
                weights[position_index] += eta * y * v.position;
                // The bias is unregularized, so it never benefits from the
                // shrink step that tames the huge early values of eta for the
                // weights. Cap its step size so early updates cannot leave a
                // fossil offset that the weights must then compensate for.
                bias += eta.min(1.0) * y;
            }
            t += 1;
        }
        let obj = objective(&weights, bias, hp.lambda, train_set);
        if !obj.is_finite() {
            return Err(Error::Divergence(epoch + 1));
        }
        loss_trace.push(obj);
    }

    Ok(TrainOutcome {
        model: LinearModel {
            weights,
            bias,
            vocabulary,
            hyperparameters: hp,
            format_version: MODEL_FORMAT_VERSION,
        },
        loss_trace,
    })
}

/// Predict a label and the signed margin. Margin exactly zero classifies
/// Positive (screening favors sensitivity).
pub fn predict(model: &LinearModel, vector: &FeatureVector) -> Result<(Label, f64)> {
    if let Some(&i) = vector.indices.iter().max() {
        if i >= model.ngram_dims() {
            return Err(Error::DimensionMismatch {
                index: i,
                dims: model.ngram_dims(),
            });
        }
    }
    let margin = score_sparse(&model.weights, model.bias, vector);
    let label = if margin >= 0.0 {
        Label::Positive
    } else {
        Label::Negative
    };
    Ok((label, margin))
}

// ---------------------------------------------------------------------------
// Model file: versioned UTF-8 text with a body checksum.
// ---------------------------------------------------------------------------

fn render_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn model_body(model: &LinearModel) -> String {
    let mut body = String::new();
    let _ = writeln!(body, "lambda: {}", render_f64(model.hyperparameters.lambda));
    let _ = writeln!(body, "epochs: {}", model.hyperparameters.epochs);
    let _ = writeln!(body, "seed: {}", model.hyperparameters.seed);
    let _ = writeln!(body, "encoding: binary-presence");
    let _ = writeln!(body, "unigram_cap: {}", model.vocabulary.unigram_cap);
    let _ = writeln!(body, "bigram_cap: {}", model.vocabulary.bigram_cap);
    let _ = writeln!(body, "[unigrams] {}", model.vocabulary.unigrams.len());
    for (u, df) in model
        .vocabulary
        .unigrams
        .iter()
        .zip(&model.vocabulary.unigram_df)
    {
        let _ = writeln!(body, "{u}\t{df}");
    }
    let _ = writeln!(body, "[bigrams] {}", model.vocabulary.bigrams.len());
    for ((a, b), df) in model
        .vocabulary
        .bigrams
        .iter()
        .zip(&model.vocabulary.bigram_df)
    {
        let _ = writeln!(body, "{a}\t{b}\t{df}");
    }
    let _ = writeln!(body, "[weights] {}", model.ngram_dims());
    for w in &model.weights[..model.ngram_dims()] {
        let _ = writeln!(body, "{}", render_f64(*w));
    }
    let _ = writeln!(body, "position_weight: {}", render_f64(model.position_weight()));
    let _ = writeln!(body, "bias: {}", render_f64(model.bias));
    body
}

pub fn save_model(model: &LinearModel, path: &Path) -> Result<()> {
    let body = model_body(model);
    let checksum = hex_digest(&body);
    let content = format!(
        "opioid-nlp-model\nformat_version: {}\nchecksum: {}\n{}",
        model.format_version, checksum, body
    );
    std::fs::write(path, content)?;
    Ok(())
}

fn hex_digest(body: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(body.as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn load_model(path: &Path) -> Result<LinearModel> {
    let content = std::fs::read_to_string(path)?;
    let mut lines = content.splitn(4, '\n');
    let magic = lines.next().unwrap_or("");
    if magic != "opioid-nlp-model" {
        return Err(Error::ModelFormat("missing file magic".into()));
    }
    let version_line = lines.next().unwrap_or("");
    let found: u32 = version_line
        .strip_prefix("format_version: ")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::ModelFormat("missing format_version".into()))?;
    if found != MODEL_FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found,
            expected: MODEL_FORMAT_VERSION,
        });
    }
    let checksum_line = lines.next().unwrap_or("");
    let checksum = checksum_line
        .strip_prefix("checksum: ")
        .ok_or_else(|| Error::ModelFormat("missing checksum".into()))?;
    let body = lines.next().unwrap_or("");
    if hex_digest(body) != checksum {
        return Err(Error::ChecksumMismatch);
    }
    parse_model_body(body)
}

fn next_field(lines: &mut std::str::Lines<'_>, prefix: &str) -> Result<String> {
    lines
        .next()
        .and_then(|l| l.strip_prefix(prefix))
        .map(str::to_string)
        .ok_or_else(|| Error::ModelFormat(format!("expected '{prefix}'")))
}

fn parse_model_body(body: &str) -> Result<LinearModel> {
    let bad = |msg: &str| Error::ModelFormat(msg.to_string());
    let mut lines = body.lines();
    let lambda: f64 = next_field(&mut lines, "lambda: ")?
        .parse()
        .map_err(|_| bad("bad lambda"))?;
    let epochs: usize = next_field(&mut lines, "epochs: ")?
        .parse()
        .map_err(|_| bad("bad epochs"))?;
    let seed: u64 = next_field(&mut lines, "seed: ")?
        .parse()
        .map_err(|_| bad("bad seed"))?;
    let encoding = next_field(&mut lines, "encoding: ")?;
    if encoding != "binary-presence" {
        return Err(bad("unknown feature encoding"));
    }
    let unigram_cap: usize = next_field(&mut lines, "unigram_cap: ")?
        .parse()
        .map_err(|_| bad("bad unigram_cap"))?;
    let bigram_cap: usize = next_field(&mut lines, "bigram_cap: ")?
        .parse()
        .map_err(|_| bad("bad bigram_cap"))?;

    let n_uni: usize = next_field(&mut lines, "[unigrams] ")?
        .parse()
        .map_err(|_| bad("bad unigram count"))?;
    let mut unigrams = Vec::with_capacity(n_uni);
    let mut unigram_df = Vec::with_capacity(n_uni);
    for _ in 0..n_uni {
        let line = lines.next().ok_or_else(|| bad("truncated unigrams"))?;
        let (u, df) = line.split_once('\t').ok_or_else(|| bad("bad unigram line"))?;
        unigrams.push(u.to_string());
        unigram_df.push(df.parse().map_err(|_| bad("bad unigram df"))?);
    }
    let n_bi: usize = next_field(&mut lines, "[bigrams] ")?
        .parse()
        .map_err(|_| bad("bad bigram count"))?;
    let mut bigrams = Vec::with_capacity(n_bi);
    let mut bigram_df = Vec::with_capacity(n_bi);
    for _ in 0..n_bi {
        let line = lines.next().ok_or_else(|| bad("truncated bigrams"))?;
        let mut cols = line.split('\t');
        let a = cols.next().ok_or_else(|| bad("bad bigram line"))?;
        let b = cols.next().ok_or_else(|| bad("bad bigram line"))?;
        let df = cols.next().ok_or_else(|| bad("bad bigram line"))?;
        bigrams.push((a.to_string(), b.to_string()));
        bigram_df.push(df.parse().map_err(|_| bad("bad bigram df"))?);
    }
    let n_weights: usize = next_field(&mut lines, "[weights] ")?
        .parse()
        .map_err(|_| bad("bad weight count"))?;
    if n_weights != n_uni + n_bi {
        return Err(bad("weight count does not match vocabulary"));
    }
    let mut weights = Vec::with_capacity(n_weights + 1);
    for _ in 0..n_weights {
        let line = lines.next().ok_or_else(|| bad("truncated weights"))?;
        weights.push(line.parse().map_err(|_| bad("bad weight value"))?);
    }
    let position_weight: f64 = next_field(&mut lines, "position_weight: ")?
        .parse()
        .map_err(|_| bad("bad position weight"))?;
    weights.push(position_weight);
    let bias: f64 = next_field(&mut lines, "bias: ")?
        .parse()
        .map_err(|_| bad("bad bias"))?;
    if !weights.iter().all(|w| w.is_finite()) || !bias.is_finite() {
        return Err(bad("non-finite values"));
    }

    Ok(LinearModel {
        weights,
        bias,
        vocabulary: Vocabulary {
            unigrams,
            bigrams,
            unigram_cap,
            bigram_cap,
            unigram_df,
            bigram_df,
        },
        hyperparameters: Hyperparameters {
            lambda,
            epochs,
            seed,
        },
        format_version: MODEL_FORMAT_VERSION,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(indices: &[usize], position: f64, label: Label) -> FeatureVector {
        FeatureVector {
            indices: indices.to_vec(),
            position,
            label: Some(label),
        }
    }

    fn tiny_vocab(n_unigrams: usize) -> Vocabulary {
        Vocabulary {
            unigrams: (0..n_unigrams).map(|i| format!("w{i}")).collect(),
            bigrams: vec![],
            unigram_cap: 946,
            bigram_cap: 474,
            unigram_df: vec![2; n_unigrams],
            bigram_df: vec![],
        }
    }

    #[test]
    fn stratified_split_arithmetic() {
        let mut vectors = Vec::new();
        for i in 0..5 {
            vectors.push(fv(&[i], 0.0, Label::Positive));
            vectors.push(fv(&[i], 0.0, Label::Negative));
        }
        let (train, test) = split_train_test(&vectors, 0.8, 42).unwrap();
        assert_eq!(train.len(), 8);
        assert_eq!(test.len(), 2);
        let pos = |s: &[FeatureVector]| s.iter().filter(|v| v.label == Some(Label::Positive)).count();
        assert_eq!(pos(&train), 4);
        assert_eq!(pos(&test), 1);
    }

    #[test]
    fn split_is_deterministic() {
        let vectors: Vec<FeatureVector> = (0..20)
            .map(|i| {
                fv(&[i], 0.0, if i % 2 == 0 { Label::Positive } else { Label::Negative })
            })
            .collect();
        let a = split_train_test(&vectors, 0.8, 7).unwrap();
        let b = split_train_test(&vectors, 0.8, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn full_fraction_rejected() {
        let vectors = vec![
            fv(&[0], 0.0, Label::Positive),
            fv(&[1], 0.0, Label::Positive),
            fv(&[2], 0.0, Label::Negative),
            fv(&[3], 0.0, Label::Negative),
        ];
        assert!(split_train_test(&vectors, 1.0, 0).is_err());
    }

    #[test]
    fn small_class_rejected() {
        let vectors = vec![
            fv(&[0], 0.0, Label::Positive),
            fv(&[1], 0.0, Label::Negative),
            fv(&[2], 0.0, Label::Negative),
        ];
        assert!(split_train_test(&vectors, 0.8, 0).is_err());
    }

    #[test]
    fn separable_two_point_set_learned() {
        let data = vec![
            fv(&[0], 0.0, Label::Positive),
            fv(&[1], 0.0, Label::Negative),
        ];
        let hp = Hyperparameters {
            lambda: 1e-4,
            epochs: 30,
            seed: 1,
        };
        let outcome = train(&data, tiny_vocab(2), hp).unwrap();
        for v in &data {
            let (label, _) = predict(&outcome.model, v).unwrap();
            assert_eq!(Some(label), v.label);
        }
    }

    #[test]
    fn separable_200_point_set_reaches_full_training_accuracy() {
        // known separating hyperplane: feature 0 present => positive
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut data = Vec::new();
        for i in 0..200 {
            let positive = i % 2 == 0;
            let mut indices = vec![if positive { 0 } else { 1 }];
            indices.push(2 + (rng.gen_range(0..8usize)));
            indices.sort_unstable();
            indices.dedup();
            data.push(fv(
                &indices,
                rng.gen_range(0.0..1.0),
                if positive { Label::Positive } else { Label::Negative },
            ));
        }
        let outcome = train(&data, tiny_vocab(10), Hyperparameters::default()).unwrap();
        let correct = data
            .iter()
            .filter(|v| predict(&outcome.model, v).unwrap().0 == v.label.unwrap())
            .count();
        assert_eq!(correct, 200);
    }

    #[test]
    fn training_is_bit_deterministic() {
        let data: Vec<FeatureVector> = (0..40)
            .map(|i| {
                fv(&[i % 5], (i % 7) as f64 / 7.0, if i % 2 == 0 { Label::Positive } else { Label::Negative })
            })
            .collect();
        let hp = Hyperparameters::default();
        let a = train(&data, tiny_vocab(5), hp).unwrap();
        let b = train(&data, tiny_vocab(5), hp).unwrap();
        assert_eq!(a.model.weights, b.model.weights);
        assert_eq!(a.model.bias, b.model.bias);
        assert_eq!(a.loss_trace, b.loss_trace);
    }

    #[test]
    fn final_objective_no_worse_than_first_epoch() {
        let data: Vec<FeatureVector> = (0..60)
            .map(|i| {
                fv(
                    &[i % 6, 6 + i % 3],
                    (i % 11) as f64 / 11.0,
                    if i % 3 == 0 { Label::Positive } else { Label::Negative },
                )
            })
            .collect();
        let outcome = train(&data, tiny_vocab(9), Hyperparameters::default()).unwrap();
        assert!(outcome.loss_trace.iter().all(|l| l.is_finite()));
        assert!(outcome.loss_trace.last().unwrap() <= outcome.loss_trace.first().unwrap());
    }

    #[test]
    fn bias_only_prediction() {
        let model = LinearModel {
            weights: vec![0.0, 0.0, 0.0],
            bias: 0.5,
            vocabulary: tiny_vocab(2),
            hyperparameters: Hyperparameters::default(),
            format_version: MODEL_FORMAT_VERSION,
        };
        let (label, margin) = predict(&model, &fv(&[], 0.0, Label::Negative)).unwrap();
        assert_eq!(label, Label::Positive);
        assert!((margin - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_margin_classifies_positive() {
        let model = LinearModel {
            weights: vec![0.0, 0.0, 0.0],
            bias: 0.0,
            vocabulary: tiny_vocab(2),
            hyperparameters: Hyperparameters::default(),
            format_version: MODEL_FORMAT_VERSION,
        };
        let (label, margin) = predict(&model, &fv(&[0], 0.5, Label::Negative)).unwrap();
        assert_eq!(label, Label::Positive);
        assert_eq!(margin, 0.0);
    }

    #[test]
    fn scale_invariance_of_labels() {
        let mut model = LinearModel {
            weights: vec![0.7, -1.3, 0.2],
            bias: -0.1,
            vocabulary: tiny_vocab(2),
            hyperparameters: Hyperparameters::default(),
            format_version: MODEL_FORMAT_VERSION,
        };
        let vectors: Vec<FeatureVector> = vec![
            fv(&[0], 0.3, Label::Positive),
            fv(&[1], 0.9, Label::Negative),
            fv(&[0, 1], 0.0, Label::Negative),
        ];
        let before: Vec<Label> = vectors
            .iter()
            .map(|v| predict(&model, v).unwrap().0)
            .collect();
        for w in model.weights.iter_mut() {
            *w *= 3.5;
        }
        model.bias *= 3.5;
        let after: Vec<Label> = vectors
            .iter()
            .map(|v| predict(&model, v).unwrap().0)
            .collect();
        assert_eq!(before, after);
    }

    #[test]
    fn dimension_mismatch_detected() {
        let model = LinearModel {
            weights: vec![0.0, 0.0, 0.0],
            bias: 0.0,
            vocabulary: tiny_vocab(2),
            hyperparameters: Hyperparameters::default(),
            format_version: MODEL_FORMAT_VERSION,
        };
        assert!(predict(&model, &fv(&[5], 0.0, Label::Positive)).is_err());
    }

    #[test]
    fn model_round_trip_preserves_predictions() {
        let data: Vec<FeatureVector> = (0..80)
            .map(|i| {
                fv(
                    &[i % 7],
                    (i % 13) as f64 / 13.0,
                    if i % 2 == 0 { Label::Positive } else { Label::Negative },
                )
            })
            .collect();
        let outcome = train(&data, tiny_vocab(7), Hyperparameters::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.txt");
        save_model(&outcome.model, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(outcome.model, loaded);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let n = rng.gen_range(0..5);
            let mut indices: Vec<usize> = (0..n).map(|_| rng.gen_range(0..7)).collect();
            indices.sort_unstable();
            indices.dedup();
            let v = FeatureVector {
                indices,
                position: rng.gen_range(0.0..1.0),
                label: None,
            };
            assert_eq!(
                predict(&outcome.model, &v).unwrap(),
                predict(&loaded, &v).unwrap()
            );
        }
    }

    #[test]
    fn wrong_version_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.txt");
        std::fs::write(
            &path,
            "opioid-nlp-model\nformat_version: 99\nchecksum: 00\n",
        )
        .unwrap();
        assert!(matches!(
            load_model(&path),
            Err(Error::VersionMismatch { found: 99, .. })
        ));
    }

    #[test]
    fn truncated_file_fails_checksum() {
        let data = vec![
            fv(&[0], 0.0, Label::Positive),
            fv(&[1], 0.0, Label::Negative),
        ];
        let outcome = train(&data, tiny_vocab(2), Hyperparameters::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.txt");
        save_model(&outcome.model, &path).unwrap();
        let content = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, &content[..content.len() - 10]).unwrap();
        assert!(matches!(load_model(&path), Err(Error::ChecksumMismatch)));
    }
}
