//! End-to-end composition: image → filter magnitudes → block features →
//! kernel subspace embedding → nearest-class-mean decision.

use std::path::Path;

use crate::classify::{fit_classes, ClassModel, Measure};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::eval::{compute_metrics, counts_at, score_probes, ReportRow};
use crate::features::{stack_features, FeatureVector};
use crate::gabor::GaborTransform;
use crate::image::{Dataset, GrayImage, Role};
use crate::keca::{load_model, save_model, KecaModel};

/// The feature-extraction front end, bound to one configuration.
pub struct Pipeline {
    config: PipelineConfig,
    transform: GaborTransform,
}

impl std::fmt::Debug for Pipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Pipeline")
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Result<Pipeline> {
        config.validate()?;
        let transform = GaborTransform::new(&config.gabor_params(), config.width, config.height)?;
        Ok(Pipeline { config, transform })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    /// Feature vector of one image. Images that are not already at the
    /// working geometry are resized first.
    pub fn features(&self, image: &GrayImage) -> Result<FeatureVector> {
        let resized;
        let image = if image.width() == self.config.width && image.height() == self.config.height {
            image
        } else {
            resized = image.resize_bilinear(self.config.width, self.config.height)?;
            &resized
        };
        let mags = self.transform.apply(image)?;
        stack_features(&mags, self.config.block)
    }

    /// Fits the subspace model and class statistics on the dataset's
    /// training entries.
    pub fn fit(self, dataset: &Dataset) -> Result<FittedPipeline> {
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for entry in dataset.train() {
            features.push(self.features(&entry.image)?.values);
            labels.push(entry.label.clone());
        }
        if features.is_empty() {
            return Err(Error::Model {
                reason: "dataset has no training entries".into(),
            });
        }
        let model = KecaModel::fit(&features, self.config.kernel_spec()?, self.config.retention())?;
        FittedPipeline::assemble(self, model, labels)
    }
}

/// A fitted pipeline: everything needed to embed and classify new images.
pub struct FittedPipeline {
    pipeline: Pipeline,
    model: KecaModel,
    labels: Vec<String>,
    classes: ClassModel,
}

impl std::fmt::Debug for FittedPipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FittedPipeline")
            .field("pipeline", &self.pipeline)
            .field("train_len", &self.labels.len())
            .field("k", &self.model.k())
            .finish_non_exhaustive()
    }
}

impl FittedPipeline {
    fn assemble(pipeline: Pipeline, model: KecaModel, labels: Vec<String>) -> Result<FittedPipeline> {
        let embedded = model.project_train();
        let classes = fit_classes(&embedded, &labels)?;
        Ok(FittedPipeline {
            pipeline,
            model,
            labels,
            classes,
        })
    }

    /// Rebuilds a fitted pipeline from a saved subspace model and its
    /// per-sample training labels.
    pub fn from_model(pipeline: Pipeline, model: KecaModel, labels: Vec<String>) -> Result<FittedPipeline> {
        if labels.len() != model.train_len() {
            return Err(Error::Model {
                reason: format!(
                    "{} labels for {} training samples",
                    labels.len(),
                    model.train_len()
                ),
            });
        }
        Self::assemble(pipeline, model, labels)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        save_model(path, &self.model, &self.labels)
    }

    pub fn load(pipeline: Pipeline, path: impl AsRef<Path>) -> Result<FittedPipeline> {
        let (model, labels) = load_model(path)?;
        Self::from_model(pipeline, model, labels)
    }

    pub fn pipeline(&self) -> &Pipeline {
        &self.pipeline
    }

    pub fn model(&self) -> &KecaModel {
        &self.model
    }

    pub fn classes(&self) -> &ClassModel {
        &self.classes
    }

    /// Per-sample training labels (manifest order).
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Embeds one image into the retained subspace.
    pub fn embed(&self, image: &GrayImage) -> Result<Vec<f64>> {
        let features = self.pipeline.features(image)?;
        self.model.project(&features.values)
    }

    /// Classifies one image: `(label, distance to that class mean)`.
    pub fn predict(&self, image: &GrayImage, measure: Measure) -> Result<(String, f64)> {
        let embedding = self.embed(image)?;
        let (class, distance) = self.classes.classify(measure, &embedding)?;
        Ok((self.classes.labels()[class].clone(), distance))
    }

    /// Evaluates the dataset's probe entries under each measure and
    /// threshold. Probes are embedded once and classified once per measure;
    /// the thresholds then only re-count outcomes. Rows come out
    /// measure-major, thresholds in the given order.
    pub fn evaluate(
        &self,
        dataset: &Dataset,
        measures: &[Measure],
        taus: &[f64],
    ) -> Result<Vec<ReportRow>> {
        let mut probes = Vec::new();
        for entry in dataset.probes() {
            probes.push((
                self.embed(&entry.image)?,
                entry.label.clone(),
                entry.role == Role::PositiveTest,
            ));
        }
        if probes.is_empty() {
            return Err(Error::Eval {
                reason: "dataset has no probe entries".into(),
            });
        }
        let mut rows = Vec::with_capacity(measures.len() * taus.len());
        for &measure in measures {
            let scores = score_probes(&self.classes, measure, &probes)?;
            for &tau in taus {
                let counts = counts_at(&self.classes, &scores, tau)?;
                rows.push(ReportRow {
                    measure,
                    tau,
                    metrics: compute_metrics(&counts)?,
                });
            }
        }
        Ok(rows)
    }
}

/// One-call protocol: fit on the dataset's training entries, then evaluate
/// its probes with the configured measures and thresholds.
pub fn run_protocol(config: PipelineConfig, dataset: &Dataset) -> Result<Vec<ReportRow>> {
    let measures = config.measure.measures();
    let taus = config.taus();
    let fitted = Pipeline::new(config)?.fit(dataset)?;
    fitted.evaluate(dataset, &measures, &taus)
}
