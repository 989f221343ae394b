//! Contact labels, the geometric contact oracle, label corruption and
//! effective-contact selection.

mod labels;
mod oracle;
mod smooth;

pub use labels::{
    corrupt_labels, effective_contacts, label_metrics, load_labels, save_labels, ContactLabels, EffectiveContacts,
    FrameLabelRecord, LabelMetrics, LabelSequenceFile, DEFAULT_CONTACT_THRESHOLD, LABELS_VERSION,
};
pub use oracle::{annotate_body_contacts, oracle_labels, transfer_env_contacts, AnnotationConfig};
pub use smooth::{
    env_labels_to_grid, gaussian_filter_3d, gaussian_taps, grid_to_env_labels, smooth_env_labels, smooth_point_labels,
};
