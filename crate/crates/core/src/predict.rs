//! Inference: template → pair → encoder → pointers → spans.

use rayon::prelude::*;

use crate::checkpoint::Model;
use crate::decode::{decode, decode_slot, SpanPrediction};
use crate::encoding::{assemble, EncodedPair};
use crate::error::{Error, Result};
use crate::framenet::{AnnotatedInstance, Frame, FrameStore};
use crate::metrics::InstancePrediction;
use crate::neural::forward;
use crate::pointer::{make_queries, pointer_distributions, PointerDistribution};
use crate::template::{
    build_fe_template, build_frame_template, build_question_template, DefinitionTemplate,
    TemplateMode,
};
use crate::tensor::Scalar;

/// Pointer distributions of every slot of `template` for `instance`.
pub fn score_template<T: Scalar>(
    model: &Model<T>,
    instance: &AnnotatedInstance,
    template: &DefinitionTemplate,
) -> Result<(EncodedPair, Vec<PointerDistribution<T>>)> {
    let pair = assemble(instance, template, &model.vocab, model.config.markers)?;
    let encoding = forward(&model.params, &model.config.encoder, &pair)?;
    let queries = make_queries(&encoding, &pair);
    let dists = pointer_distributions(&model.params, &encoding, &pair, &queries);
    Ok((pair, dists))
}

/// Decodes the focus slot of a single-element template.
fn predict_focus<T: Scalar>(
    model: &Model<T>,
    instance: &AnnotatedInstance,
    template: &DefinitionTemplate,
    fe: &str,
) -> Result<SpanPrediction> {
    let (_, dists) = score_template(model, instance, template)?;
    let dist = dists
        .iter()
        .find(|d| d.fe == fe)
        .expect("focus element always has a slot");
    let start: Vec<f64> = dist.start_probs.iter().map(|p| p.f64()).collect();
    let end: Vec<f64> = dist.end_probs.iter().map(|p| p.f64()).collect();
    Ok(decode_slot(fe, &start, &end))
}

/// One prediction per frame element of the instance's frame, in frame order.
///
/// In frame-definition mode a single pass over the frame template yields all
/// of them; question and element-definition modes run one pass per element.
pub fn predict_instance<T: Scalar>(
    instance: &AnnotatedInstance,
    store: &FrameStore,
    model: &Model<T>,
) -> Result<Vec<SpanPrediction>> {
    let frame: &Frame = store.get(&instance.frame)?;
    let markers = model.config.markers;
    match model.config.template_mode {
        TemplateMode::FrameDef => {
            let template = build_frame_template(frame, markers);
            let (_, dists) = score_template(model, instance, &template)?;
            let mut by_slot = decode(&dists);
            let ordered = frame
                .fe_order
                .iter()
                .map(|fe| {
                    let i = by_slot
                        .iter()
                        .position(|p| &p.fe == fe)
                        .expect("frame template has a slot for every element");
                    by_slot.swap_remove(i)
                })
                .collect();
            Ok(ordered)
        }
        TemplateMode::Question => frame
            .fe_order
            .iter()
            .map(|fe| {
                let template = build_question_template(frame, fe, markers)?;
                predict_focus(model, instance, &template, fe)
            })
            .collect(),
        TemplateMode::FeDef => frame
            .fe_order
            .iter()
            .map(|fe| {
                let template = build_fe_template(frame, fe, markers)?;
                predict_focus(model, instance, &template, fe)
            })
            .collect(),
    }
}

/// Predicts every instance, in input order. `workers > 1` fans out over a
/// dedicated thread pool; results do not depend on the worker count.
pub fn predict_all<T: Scalar>(
    instances: &[AnnotatedInstance],
    store: &FrameStore,
    model: &Model<T>,
    workers: usize,
) -> Result<Vec<InstancePrediction>> {
    let run = |inst: &AnnotatedInstance| {
        predict_instance(inst, store, model).map(|predictions| InstancePrediction {
            frame: inst.frame.clone(),
            predictions,
        })
    };
    if workers <= 1 {
        return instances.iter().map(run).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Experiment(format!("thread pool: {e}")))?;
    pool.install(|| instances.par_iter().map(run).collect())
}
