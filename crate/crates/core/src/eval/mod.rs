//! Calorie-estimate evaluation: MAE/MAPE reports, multi-run aggregation,
//! published reference numbers and figures.

mod figures;
mod font;
mod reference;
mod report;

pub use figures::{panel_caption, qualitative_panel, render_panel, ErrorHistogram, HISTOGRAM_BINS};
pub use reference::{ReferenceRegistry, ReferenceRow, ReferenceTable};
pub use report::{
    aggregate, evaluate, mae, mape, AggregateReport, CalorieDecoder, DensityEncoder,
    EvaluationReport, GrayscaleDecoder, GroundTruthEncoder, InstanceRecord, PipelineDescriptor,
    SummationDecoder,
};
