//! Archive layout (one tar per attribute), third-party conversion and the
//! generation manifest.

mod convert;
mod layout;
mod manifest;

pub use convert::{
    convert_clip, convert_third_party, ConversionReport, DropReason, QuaternionOrder, SourceBox, SourceClip,
    SourceDescriptor, SourceMapFeature, SourceObject, SourcePose,
};
pub use layout::{
    clip_records, load_clip, save_clip, save_clips, write_raw_record, Attribute, CalibrationRecord, CaptionRecord,
    RdsHqLayout,
};
pub(crate) use layout::write_file_atomic;
pub use manifest::{
    fold_manifest, read_manifest, ManifestEntry, ManifestLog, ManifestStats, ManifestWriter, Stage, VerdictLabel,
};
