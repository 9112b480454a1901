use std::collections::BTreeMap;

use crate::baselines::{self, BaselineModel};
use crate::dnn::{self, Mlp, TrainHistory};
use crate::error::{Error, Result};
use crate::feature_store::{
    binarize_labels, read_fvec, split_indices, LabeledFeatureSet, SplitIndices, SplitSpec,
};
use crate::fusion::{blend_dataset, blend_pair_dataset, check_aligned};
use crate::metrics::{confusion_matrix, EvalReport};

use super::config::{ExperimentConfig, Fusion, Modality, ModelKind, Task};
use super::report::{emit_report, ReportFormat};

/// Seed offset for the validation hold-out, so it is not a copy of the outer split's shuffle.
const VALIDATION_SEED_SALT: u64 = 0x005e_ed0f_7a1d;

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub report: EvalReport,
    /// Outer train/test partition over row indices of the input files.
    pub split: SplitIndices,
    /// Rows of `split.train` actually fitted (validation rows removed).
    pub fit_rows: Vec<usize>,
    pub validation_rows: Vec<usize>,
    pub mlp: Option<Mlp>,
    pub history: Option<TrainHistory>,
}

/// Loads every modality the run needs and checks that their labels line up.
pub fn load_modalities(cfg: &ExperimentConfig) -> Result<BTreeMap<ModalityKey, LabeledFeatureSet>> {
    let mut sets = BTreeMap::new();
    for m in cfg.fusion.modalities() {
        let path = cfg
            .features
            .get(m)
            .ok_or_else(|| Error::Config(format!("features.{m} is required by this run")))?;
        sets.insert(ModalityKey(m as u8), read_fvec(path)?);
    }
    let refs: Vec<&LabeledFeatureSet> = sets.values().collect();
    check_aligned(&refs)?;
    Ok(sets)
}

/// Orders modalities fc1 < fc2 < third inside maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct ModalityKey(u8);

impl ModalityKey {
    pub fn of(m: Modality) -> Self {
        ModalityKey(m as u8)
    }
}

fn prepare_labels(set: LabeledFeatureSet, task: Task) -> Result<LabeledFeatureSet> {
    match (task, set.n_classes()) {
        (Task::Identify, 5) => binarize_labels(&set),
        (Task::Identify, 2) | (Task::Severity, _) => Ok(set),
        (Task::Identify, k) => Err(Error::domain(format!(
            "identification needs 5 severity grades or binary labels, found {k} classes"
        ))),
    }
}

/// Applies the configured fusion to whole, aligned modality sets.
pub fn fuse(
    cfg: &ExperimentConfig,
    sets: &BTreeMap<ModalityKey, LabeledFeatureSet>,
) -> Result<LabeledFeatureSet> {
    let get = |m: Modality| {
        sets.get(&ModalityKey::of(m))
            .ok_or_else(|| Error::Config(format!("modality {m} not loaded")))
    };
    match cfg.fusion {
        Fusion::Blend3(b) => blend_dataset(
            get(Modality::Fc1)?,
            get(Modality::Fc2)?,
            get(Modality::Third)?,
            &b,
        ),
        Fusion::Blend2(b) => blend_pair_dataset(get(Modality::Fc1)?, get(Modality::Fc2)?, &b),
        Fusion::Single(m) => Ok(get(m)?.clone()),
    }
}

/// Splits `train` indices into (fit, validation) using the outer split's settings.
fn hold_out_validation(
    labels: &[usize],
    train: &[usize],
    cfg: &ExperimentConfig,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if cfg.validation_fraction == 0.0 {
        return Ok((train.to_vec(), train.to_vec()));
    }
    let inner_labels: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
    let inner = split_indices(
        &inner_labels,
        &SplitSpec {
            train_fraction: 1.0 - cfg.validation_fraction,
            seed: cfg.split.seed ^ VALIDATION_SEED_SALT,
            stratified: cfg.split.stratified,
        },
    )?;
    Ok((
        inner.train.iter().map(|&i| train[i]).collect(),
        inner.test.iter().map(|&i| train[i]).collect(),
    ))
}

/// Runs the whole pipeline on already-loaded modality sets.
pub fn run_on_sets(
    cfg: &ExperimentConfig,
    sets: BTreeMap<ModalityKey, LabeledFeatureSet>,
) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let sets = sets
        .into_iter()
        .map(|(k, s)| prepare_labels(s, cfg.task).map(|s| (k, s)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    let data = fuse(cfg, &sets)?;
    let split = split_indices(data.labels(), &cfg.split)?;
    let test = data.select(&split.test)?;
    let n_classes = data.n_classes();

    let mut fit_rows = split.train.clone();
    let mut validation_rows = Vec::new();
    let mut mlp = None;
    let mut history = None;

    let (predictions, epochs, final_loss) = match cfg.model {
        ModelKind::Dnn => {
            let (fit, val) = hold_out_validation(data.labels(), &split.train, cfg)?;
            let fit_set = data.select(&fit)?;
            let val_set = data.select(&val)?;
            let net = Mlp::init(cfg.mlp_config(data.dim(), n_classes), cfg.train.seed)?;
            let (net, hist) = dnn::train(net, &fit_set, &val_set, &cfg.train)?;
            let preds = dnn::predict(&net, &test)?;
            let out = (preds, hist.epochs_run, hist.best_train_loss());
            fit_rows = fit;
            validation_rows = val;
            mlp = Some(net);
            history = Some(hist);
            out
        }
        ModelKind::LogReg => {
            let train = data.select(&split.train)?;
            let (model, hist) = baselines::fit_logreg_traced(&train, &cfg.train)?;
            let out = (
                model.predict_set(&test)?,
                hist.epochs_run,
                hist.best_train_loss(),
            );
            history = Some(hist);
            out
        }
        ModelKind::Knn { k } => {
            let model = BaselineModel::knn(data.select(&split.train)?, k)?;
            (model.predict_set(&test)?, 0, 0.0)
        }
        ModelKind::GaussianNb => {
            let model = baselines::fit_gnb(&data.select(&split.train)?)?;
            (model.predict_set(&test)?, 0, 0.0)
        }
    };

    let cm = confusion_matrix(test.labels(), &predictions, n_classes)?;
    let report = EvalReport::from_confusion(cm, epochs, final_loss)?;
    Ok(ExperimentOutcome {
        report,
        split,
        fit_rows,
        validation_rows,
        mlp,
        history,
    })
}

/// load -> (binarize) -> blend -> split -> fit -> evaluate.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    run_on_sets(cfg, load_modalities(cfg)?)
}

/// Writes whichever report and checkpoint paths the config names.
pub fn write_outputs(cfg: &ExperimentConfig, outcome: &ExperimentOutcome) -> Result<()> {
    if let Some(p) = &cfg.report.csv {
        emit_report(&outcome.report, ReportFormat::Csv, p)?;
    }
    if let Some(p) = &cfg.report.text {
        emit_report(&outcome.report, ReportFormat::Text, p)?;
    }
    if let Some(p) = &cfg.report.checkpoint {
        let net = outcome
            .mlp
            .as_ref()
            .ok_or_else(|| Error::Config("report.checkpoint requires model = dnn".into()))?;
        if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        net.save(p)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::fixture::{make_synthetic_fixture, FixtureSpec};

    fn sets(n_classes: usize, separation: f64) -> BTreeMap<ModalityKey, LabeledFeatureSet> {
        let fx = make_synthetic_fixture(&FixtureSpec {
            n_per_class: 20,
            n_classes,
            dims: (16, 16, 8),
            separation,
            seed: 4,
        })
        .unwrap();
        BTreeMap::from([
            (ModalityKey::of(Modality::Fc1), fx.fc1),
            (ModalityKey::of(Modality::Fc2), fx.fc2),
            (ModalityKey::of(Modality::Third), fx.third),
        ])
    }

    fn small_cfg() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.features.fc1 = Some("fc1".into());
        cfg.features.fc2 = Some("fc2".into());
        cfg.features.third = Some("third".into());
        cfg.hidden = Some(vec![16]);
        cfg.train.max_epochs = 30;
        cfg.train.learning_rate = 0.01;
        cfg
    }

    #[test]
    fn identify_binarizes_and_counts_sum_to_test_size() {
        let mut cfg = small_cfg();
        cfg.task = Task::Identify;
        let out = run_on_sets(&cfg, sets(5, 10.0)).unwrap();
        let cm = &out.report.confusion;
        assert_eq!(cm.n_classes(), 2);
        assert_eq!(cm.row_sum(0) + cm.row_sum(1), out.split.test.len() as u64);
        assert_eq!(out.report.accuracy, 1.0);
    }

    #[test]
    fn validation_rows_come_from_train_only() {
        let out = run_on_sets(&small_cfg(), sets(5, 10.0)).unwrap();
        let mut inner: Vec<usize> = out
            .fit_rows
            .iter()
            .chain(&out.validation_rows)
            .copied()
            .collect();
        inner.sort_unstable();
        assert_eq!(inner, out.split.train);
        assert!(out
            .validation_rows
            .iter()
            .all(|i| !out.split.test.contains(i)));
    }

    #[test]
    fn unimodal_and_blended_share_test_indices() {
        let blended = run_on_sets(&small_cfg(), sets(3, 5.0)).unwrap();
        let mut uni_cfg = small_cfg();
        uni_cfg.fusion = Fusion::Single(Modality::Third);
        let uni = run_on_sets(&uni_cfg, sets(3, 5.0)).unwrap();
        assert_eq!(blended.split, uni.split);
    }

    #[test]
    fn baselines_run() {
        for model in [ModelKind::Knn { k: 3 }, ModelKind::GaussianNb] {
            let mut cfg = small_cfg();
            cfg.model = model;
            let out = run_on_sets(&cfg, sets(5, 10.0)).unwrap();
            assert_eq!(out.report.epochs_run, 0);
            assert!(
                out.report.accuracy > 0.9,
                "{model:?}: {}",
                out.report.accuracy
            );
        }
        let mut cfg = small_cfg();
        cfg.model = ModelKind::LogReg;
        cfg.task = Task::Identify;
        let out = run_on_sets(&cfg, sets(5, 10.0)).unwrap();
        assert!(out.report.epochs_run > 0);
    }

    #[test]
    fn misaligned_modalities_fail() {
        let mut s = sets(3, 1.0);
        let third = s.get(&ModalityKey::of(Modality::Third)).unwrap().clone();
        let mut labels = third.labels().to_vec();
        labels.swap(0, 1);
        let shuffled = LabeledFeatureSet::new(third.rows().to_vec(), labels, 3).unwrap();
        s.insert(ModalityKey::of(Modality::Third), shuffled);
        assert!(matches!(
            run_on_sets(&small_cfg(), s),
            Err(Error::Alignment(_))
        ));
    }
}
