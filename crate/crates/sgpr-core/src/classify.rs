//! Sparse-coefficient target classification and scoring.
//!
//! Features are full-length sparse coefficient vectors over a learned
//! dictionary; the classifier is a deterministic one-vs-rest linear hinge
//! model. Scoring covers confusion matrices, per-class correct-classification
//! probabilities, halo-based detection rates, classification maps, and the
//! reduced-sampling robustness experiment.

use crate::error::{Error, Result};
use crate::rng::{self, stream};
use crate::sparse_coding::{batch_omp, SparseCodeMatrix, StopRule};
use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::prelude::*;
use serde::{Deserialize, Serialize};

/// Training hyperparameters for the linear classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainParams {
    /// L2 regularization strength (the C-analog, inverted).
    pub l2_regularization: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            l2_regularization: 1e-4,
            epochs: 60,
            seed: 0,
        }
    }
}

/// One-vs-rest linear model: one weight vector and bias per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    /// C×K weight matrix.
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
    pub class_names: Vec<String>,
    pub params: TrainParams,
    pub training_accuracy: f64,
}

impl ClassifierModel {
    pub fn class_count(&self) -> usize {
        self.weights.nrows()
    }

    pub fn feature_len(&self) -> usize {
        self.weights.ncols()
    }
}

/// Sparse-code features for classification: batch-OMP coefficients over the
/// given atoms, one full-length column per profile (zeros included).
pub fn extract_features(
    y: ArrayView2<f64>,
    atoms: ArrayView2<f64>,
    stop: &StopRule,
) -> Result<SparseCodeMatrix> {
    batch_omp(y, atoms, stop)
}

/// Train a one-vs-rest L2-regularized hinge-loss linear classifier with
/// deterministic epoch-ordered subgradient descent (Pegasos-style steps; the
/// per-epoch visiting order is derived from the seed).
pub fn train_classifier(
    features: ArrayView2<f64>,
    labels: &[u16],
    class_names: &[String],
    params: &TrainParams,
) -> Result<ClassifierModel> {
    let (k, n) = features.dim();
    if labels.len() != n {
        return Err(Error::dim(format!("{} labels for {n} samples", labels.len())));
    }
    let c = class_names.len();
    if c < 2 {
        return Err(Error::param("classification needs at least two classes"));
    }
    if params.epochs == 0 || !(params.l2_regularization > 0.0) {
        return Err(Error::param("epochs must be >= 1 and regularization > 0"));
    }
    let mut present = vec![false; c];
    for &l in labels {
        let idx = l as usize;
        if idx >= c {
            return Err(Error::param(format!("label {l} out of range for {c} classes")));
        }
        present[idx] = true;
    }
    if let Some(missing) = present.iter().position(|&p| !p) {
        return Err(Error::param(format!(
            "class '{}' has no training samples",
            class_names[missing]
        )));
    }

    let lambda = params.l2_regularization;
    let mut weights = Array2::<f64>::zeros((c, k));
    let mut biases = Array1::<f64>::zeros(c);
    for class in 0..c {
        let mut w = Array1::<f64>::zeros(k);
        let mut b = 0.0f64;
        let mut step = 1u64;
        for epoch in 0..params.epochs {
            let mut order: Vec<usize> = (0..n).collect();
            let mut rng = stream(
                params.seed,
                rng::TAG_CLASSIFIER,
                (class as u64) << 32 | epoch as u64,
            );
            order.shuffle(&mut rng);
            for &i in &order {
                let z = if labels[i] as usize == class { 1.0 } else { -1.0 };
                let f = features.column(i);
                let margin = z * (w.dot(&f) + b);
                let eta = 1.0 / (lambda * step as f64);
                w.mapv_inplace(|v| v * (1.0 - eta * lambda));
                if margin < 1.0 {
                    w.scaled_add(eta * z, &f);
                    b += eta * z * 0.1;
                }
                step += 1;
            }
        }
        weights.row_mut(class).assign(&w);
        biases[class] = b;
    }

    let mut model = ClassifierModel {
        weights,
        biases,
        class_names: class_names.to_vec(),
        params: params.clone(),
        training_accuracy: 0.0,
    };
    let predictions = predict(&model, features);
    let hits = predictions
        .iter()
        .zip(labels.iter())
        .filter(|(p, t)| p == t)
        .count();
    model.training_accuracy = hits as f64 / n as f64;
    Ok(model)
}

/// Predict labels: per-class linear scores, argmax, ties to the lowest class
/// index.
pub fn predict(model: &ClassifierModel, features: ArrayView2<f64>) -> Vec<u16> {
    let scores = model.weights.dot(&features);
    let c = model.class_count();
    (0..features.ncols())
        .map(|i| {
            let mut best = 0usize;
            let mut best_score = scores[(0, i)] + model.biases[0];
            for class in 1..c {
                let s = scores[(class, i)] + model.biases[class];
                if s > best_score {
                    best_score = s;
                    best = class;
                }
            }
            best as u16
        })
        .collect()
}

/// Confusion counts; columns are ground-truth classes, rows are predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Array2<u64>,
}

impl ConfusionMatrix {
    pub fn class_count(&self) -> usize {
        self.counts.nrows()
    }

    /// Column-normalized probability form; all-zero columns stay zero.
    pub fn probabilities(&self) -> Array2<f64> {
        let c = self.class_count();
        let mut p = Array2::<f64>::zeros((c, c));
        for col in 0..c {
            let total: u64 = self.counts.column(col).sum();
            if total > 0 {
                for row in 0..c {
                    p[(row, col)] = self.counts[(row, col)] as f64 / total as f64;
                }
            }
        }
        p
    }

    /// Diagonal of the probability form: per-class P_CC.
    pub fn per_class_pcc(&self) -> Vec<f64> {
        let p = self.probabilities();
        (0..self.class_count()).map(|i| p[(i, i)]).collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.sum()
    }

    pub fn overall_accuracy(&self) -> f64 {
        let trace: u64 = (0..self.class_count()).map(|i| self.counts[(i, i)]).sum();
        trace as f64 / self.total() as f64
    }
}

/// Tally predictions against ground truth.
pub fn confusion(
    predictions: &[u16],
    truth: &[u16],
    class_count: usize,
) -> Result<ConfusionMatrix> {
    if predictions.len() != truth.len() {
        return Err(Error::dim(format!(
            "{} predictions for {} truths",
            predictions.len(),
            truth.len()
        )));
    }
    let mut counts = Array2::<u64>::zeros((class_count, class_count));
    for (&p, &t) in predictions.iter().zip(truth.iter()) {
        if p as usize >= class_count || t as usize >= class_count {
            return Err(Error::param(format!(
                "label outside the {class_count}-class table"
            )));
        }
        counts[(p as usize, t as usize)] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

/// Ground-truth pixel region of one buried target on the classification map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HaloSpec {
    pub id: u32,
    pub class: u16,
    /// Inclusive rectangle bounds in map coordinates.
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl HaloSpec {
    pub fn pixel_count(&self) -> usize {
        (self.x1 - self.x0 + 1) * (self.y1 - self.y0 + 1)
    }
}

/// Class-index grid over the survey area; `grid[(y, x)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassMap {
    pub grid: Array2<u16>,
}

impl ClassMap {
    pub fn width(&self) -> usize {
        self.grid.ncols()
    }

    pub fn height(&self) -> usize {
        self.grid.nrows()
    }
}

/// Build a classification map from per-profile predictions ordered
/// line-major: prediction index = y·width + x.
pub fn render_map(predictions: &[u16], width: usize, height: usize) -> Result<ClassMap> {
    if predictions.len() != width * height {
        return Err(Error::dim(format!(
            "{} predictions for a {width}x{height} map",
            predictions.len()
        )));
    }
    let grid = Array2::from_shape_fn((height, width), |(y, x)| predictions[y * width + x]);
    Ok(ClassMap { grid })
}

/// Halo scoring result.
#[derive(Debug, Clone, PartialEq)]
pub struct HaloScores {
    /// (class index, P_CC over that class's halos)
    pub per_class_pcc: Vec<(u16, f64)>,
    /// P_CC over the outside-halo clutter region.
    pub clutter_pcc: f64,
    /// Detection probability: halos with at least `detect_threshold` of
    /// their pixels carrying any mine label.
    pub p_d: f64,
    /// Fraction of outside-halo pixels labeled as any mine.
    pub p_fa: f64,
}

/// Score a predicted map against target halos.
///
/// `P_CC` per class is (pixels predicted as the halo's class) / (halo
/// pixels); a target counts as detected when at least `detect_threshold`
/// (the two-thirds rule by default) of its halo pixels carry any non-clutter
/// label. False alarms are counted strictly over outside-halo pixels.
pub fn halo_scores(
    map: &ClassMap,
    halos: &[HaloSpec],
    clutter_class: u16,
    detect_threshold: f64,
) -> Result<HaloScores> {
    if halos.is_empty() {
        return Err(Error::param("halo scoring needs at least one halo"));
    }
    if !(0.0..=1.0).contains(&detect_threshold) {
        return Err(Error::param("detection threshold must be in [0, 1]"));
    }
    let (h, w) = map.grid.dim();
    let mut inside = Array2::<bool>::from_elem((h, w), false);
    for halo in halos {
        if halo.x1 < halo.x0 || halo.y1 < halo.y0 {
            return Err(Error::param(format!("halo {} is empty", halo.id)));
        }
        if halo.x1 >= w || halo.y1 >= h {
            return Err(Error::param(format!(
                "halo {} exceeds the {w}x{h} map",
                halo.id
            )));
        }
        for y in halo.y0..=halo.y1 {
            for x in halo.x0..=halo.x1 {
                if inside[(y, x)] {
                    return Err(Error::param(format!(
                        "halo {} overlaps another halo at ({x}, {y})",
                        halo.id
                    )));
                }
                inside[(y, x)] = true;
            }
        }
    }

    let mut class_hits: std::collections::BTreeMap<u16, (usize, usize)> = Default::default();
    let mut detected = 0usize;
    for halo in halos {
        let mut n_m = 0usize; // pixels predicted as the halo's own class
        let mut mine_pixels = 0usize; // pixels carrying any non-clutter label
        for y in halo.y0..=halo.y1 {
            for x in halo.x0..=halo.x1 {
                let label = map.grid[(y, x)];
                if label == halo.class {
                    n_m += 1;
                }
                if label != clutter_class {
                    mine_pixels += 1;
                }
            }
        }
        let entry = class_hits.entry(halo.class).or_insert((0, 0));
        entry.0 += n_m;
        entry.1 += halo.pixel_count();
        if mine_pixels as f64 >= detect_threshold * halo.pixel_count() as f64 {
            detected += 1;
        }
    }

    let mut n_c = 0usize;
    let mut n_d = 0usize;
    let mut false_alarms = 0usize;
    for y in 0..h {
        for x in 0..w {
            if !inside[(y, x)] {
                n_c += 1;
                if map.grid[(y, x)] == clutter_class {
                    n_d += 1;
                } else {
                    false_alarms += 1;
                }
            }
        }
    }

    Ok(HaloScores {
        per_class_pcc: class_hits
            .into_iter()
            .map(|(class, (hits, total))| (class, hits as f64 / total as f64))
            .collect(),
        clutter_pcc: if n_c > 0 { n_d as f64 / n_c as f64 } else { 1.0 },
        p_d: detected as f64 / halos.len() as f64,
        p_fa: if n_c > 0 {
            false_alarms as f64 / n_c as f64
        } else {
            0.0
        },
    })
}

/// Restrict a matrix to the given rows (in order).
pub fn restrict_rows(data: ArrayView2<f64>, rows: &[usize]) -> Array2<f64> {
    data.select(Axis(0), rows)
}

/// Seeded row selection for the reduced-sampling experiment: ⌈rate·M⌉
/// distinct indices, sorted ascending. Rate 1 selects every row.
pub fn subsample_rows(m: usize, rate: f64, seed: u64) -> Result<Vec<usize>> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(Error::param("subsampling rate must be in (0, 1]"));
    }
    let take = ((rate * m as f64).ceil() as usize).clamp(1, m);
    let mut rng = stream(seed, rng::TAG_SUBSAMPLE, 0);
    let mut rows: Vec<usize> = rand::seq::index::sample(&mut rng, m, take).into_vec();
    rows.sort_unstable();
    Ok(rows)
}

/// Outcome of one reduced-sampling run.
#[derive(Debug, Clone)]
pub struct SubsampleOutcome {
    pub selected_rows: Vec<usize>,
    pub predictions: Vec<u16>,
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
}

/// Reduced-sampling robustness experiment: restrict the same seeded row
/// selection to both the test profiles and the dictionary, rebuild the model
/// through `retrain` (which receives the restricted dictionary and the row
/// selection), re-extract features and re-score. At rate 1 the selection is
/// the identity and the full pipeline is reproduced exactly.
pub fn subsample_experiment(
    y_test: ArrayView2<f64>,
    test_labels: &[u16],
    atoms: ArrayView2<f64>,
    stop: &StopRule,
    rate: f64,
    seed: u64,
    retrain: impl FnOnce(ArrayView2<f64>, &[usize]) -> Result<ClassifierModel>,
) -> Result<SubsampleOutcome> {
    let m = y_test.nrows();
    if atoms.nrows() != m {
        return Err(Error::dim(format!(
            "test profiles have {m} rows, dictionary has {}",
            atoms.nrows()
        )));
    }
    let rows = subsample_rows(m, rate, seed)?;
    let y_sub = y_test.select(Axis(0), &rows);
    let d_sub = atoms.select(Axis(0), &rows);
    let model = retrain(d_sub.view(), &rows)?;
    let features = extract_features(y_sub.view(), d_sub.view(), stop)?;
    let predictions = predict(&model, features.to_dense().view());
    let confusion = confusion(&predictions, test_labels, model.class_count())?;
    let accuracy = confusion.overall_accuracy();
    Ok(SubsampleOutcome {
        selected_rows: rows,
        predictions,
        confusion,
        accuracy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("class{i}")).collect()
    }

    #[test]
    fn separable_toy_set_reaches_full_accuracy() {
        // two clusters on opposite sides of a hyperplane
        let mut features = Array2::<f64>::zeros((3, 10));
        let mut labels = Vec::new();
        for i in 0..10 {
            let side = if i % 2 == 0 { 1.0 } else { -1.0 };
            features[(0, i)] = side * (1.0 + 0.1 * i as f64);
            features[(1, i)] = 0.2 * i as f64 - 1.0;
            labels.push(if side > 0.0 { 0u16 } else { 1u16 });
        }
        let model =
            train_classifier(features.view(), &labels, &names(2), &TrainParams::default())
                .unwrap();
        assert_eq!(model.training_accuracy, 1.0);
        let predictions = predict(&model, features.view());
        assert_eq!(predictions, labels);
    }

    #[test]
    fn degenerate_training_inputs_rejected() {
        let features = Array2::<f64>::zeros((2, 4));
        let labels = vec![0u16; 4];
        assert!(train_classifier(features.view(), &labels, &names(1), &TrainParams::default())
            .is_err());
        // class 1 never appears
        assert!(train_classifier(features.view(), &labels, &names(2), &TrainParams::default())
            .is_err());
    }

    #[test]
    fn training_is_deterministic() {
        let mut features = Array2::<f64>::zeros((4, 12));
        let mut labels = Vec::new();
        for i in 0..12 {
            features[(i % 4, i)] = 1.0 + i as f64 * 0.05;
            labels.push((i % 3) as u16);
        }
        let a = train_classifier(features.view(), &labels, &names(3), &TrainParams::default())
            .unwrap();
        let b = train_classifier(features.view(), &labels, &names(3), &TrainParams::default())
            .unwrap();
        assert_eq!(a.weights, b.weights);
        assert_eq!(a.biases, b.biases);
    }

    #[test]
    fn zero_features_predict_largest_bias_and_ties_break_low() {
        let model = ClassifierModel {
            weights: Array2::zeros((3, 2)),
            biases: array![0.1, 0.9, 0.9],
            class_names: names(3),
            params: TrainParams::default(),
            training_accuracy: 0.0,
        };
        let f = Array2::<f64>::zeros((2, 1));
        assert_eq!(predict(&model, f.view()), vec![1]);
        let tied = ClassifierModel {
            biases: array![0.5, 0.5, 0.5],
            ..model
        };
        assert_eq!(predict(&tied, f.view()), vec![0]);
    }

    #[test]
    fn batch_predict_equals_per_item() {
        let model = ClassifierModel {
            weights: array![[0.3, -0.2], [-0.1, 0.4]],
            biases: array![0.05, -0.05],
            class_names: names(2),
            params: TrainParams::default(),
            training_accuracy: 0.0,
        };
        let f = array![[0.2, -0.7, 1.3], [0.9, 0.1, -0.4]];
        let batch = predict(&model, f.view());
        for i in 0..3 {
            let single = predict(&model, f.slice(ndarray::s![.., i..i + 1]));
            assert_eq!(batch[i], single[0]);
        }
    }

    #[test]
    fn confusion_perfect_constant_and_tallied() {
        let truth = vec![0u16, 1, 2, 1, 0];
        let cm = confusion(&truth, &truth, 3).unwrap();
        let p = cm.probabilities();
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_eq!(p[(i, j)], expect);
            }
        }
        let zeros = vec![0u16; 5];
        let cm = confusion(&zeros, &truth, 3).unwrap();
        let p = cm.probabilities();
        for j in 0..3 {
            assert_eq!(p[(0, j)], 1.0);
        }
        // hand-tallied random case
        let pred = vec![0u16, 2, 2, 1, 1];
        let cm = confusion(&pred, &truth, 3).unwrap();
        assert_eq!(cm.counts[(0, 0)], 1);
        assert_eq!(cm.counts[(1, 0)], 1);
        assert_eq!(cm.counts[(2, 1)], 1);
        assert_eq!(cm.counts[(1, 1)], 1);
        assert_eq!(cm.counts[(2, 2)], 1);
        assert_eq!(cm.total(), 5);
        // probability columns sum to one
        let p = cm.probabilities();
        for j in 0..3 {
            let s: f64 = p.column(j).sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn halo_scoring_perfect_boundary_and_false_alarm() {
        // 6x4 map, one 3x3 halo of class 1 at (1..3, 0..2)
        let mut grid = Array2::<u16>::zeros((4, 6));
        for y in 0..3 {
            for x in 1..4 {
                grid[(y, x)] = 1;
            }
        }
        let map = ClassMap { grid: grid.clone() };
        let halos = vec![HaloSpec {
            id: 1,
            class: 1,
            x0: 1,
            y0: 0,
            x1: 3,
            y1: 2,
        }];
        let s = halo_scores(&map, &halos, 0, 2.0 / 3.0).unwrap();
        assert_eq!(s.per_class_pcc, vec![(1, 1.0)]);
        assert_eq!(s.clutter_pcc, 1.0);
        assert_eq!(s.p_d, 1.0);
        assert_eq!(s.p_fa, 0.0);

        // exactly two-thirds of the halo labeled mine: still detected
        let mut grid2 = grid.clone();
        grid2[(0, 1)] = 0;
        grid2[(1, 2)] = 0;
        grid2[(2, 3)] = 0;
        let s = halo_scores(&ClassMap { grid: grid2 }, &halos, 0, 2.0 / 3.0).unwrap();
        assert_eq!(s.p_d, 1.0);
        assert!((s.per_class_pcc[0].1 - 6.0 / 9.0).abs() < 1e-12);

        // single mine pixel outside the halo
        let mut grid3 = grid;
        grid3[(3, 5)] = 2;
        let s = halo_scores(&ClassMap { grid: grid3 }, &halos, 0, 2.0 / 3.0).unwrap();
        let outside = 24 - 9;
        assert!((s.p_fa - 1.0 / outside as f64).abs() < 1e-12);
    }

    #[test]
    fn halo_validation() {
        let map = ClassMap {
            grid: Array2::zeros((4, 4)),
        };
        let bad = vec![HaloSpec {
            id: 1,
            class: 1,
            x0: 2,
            y0: 2,
            x1: 5,
            y1: 3,
        }];
        assert!(halo_scores(&map, &bad, 0, 0.66).is_err());
        let overlapping = vec![
            HaloSpec {
                id: 1,
                class: 1,
                x0: 0,
                y0: 0,
                x1: 2,
                y1: 2,
            },
            HaloSpec {
                id: 2,
                class: 2,
                x0: 2,
                y0: 2,
                x1: 3,
                y1: 3,
            },
        ];
        assert!(halo_scores(&map, &overlapping, 0, 0.66).is_err());
    }

    #[test]
    fn map_rendering_and_dims() {
        let preds = vec![0u16, 1, 2, 3, 4, 5];
        let map = render_map(&preds, 3, 2).unwrap();
        assert_eq!(map.width(), 3);
        assert_eq!(map.height(), 2);
        assert_eq!(map.grid[(0, 2)], 2);
        assert_eq!(map.grid[(1, 0)], 3);
        assert!(render_map(&preds, 4, 2).is_err());
        let uniform = render_map(&vec![0u16; 6], 3, 2).unwrap();
        assert!(uniform.grid.iter().all(|&v| v == 0));
    }

    #[test]
    fn subsample_rows_rate_one_is_identity() {
        let rows = subsample_rows(17, 1.0, 42).unwrap();
        assert_eq!(rows, (0..17).collect::<Vec<_>>());
        let half = subsample_rows(16, 0.5, 42).unwrap();
        assert_eq!(half.len(), 8);
        assert!(half.windows(2).all(|w| w[0] < w[1]));
        let again = subsample_rows(16, 0.5, 42).unwrap();
        assert_eq!(half, again);
        assert!(subsample_rows(8, 0.0, 1).is_err());
        assert!(subsample_rows(8, 1.5, 1).is_err());
    }
}
