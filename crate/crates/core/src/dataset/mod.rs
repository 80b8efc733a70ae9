//! Synthetic high-frame-rate scenes, temporal-level blur ladders and their
//! on-disk form.

mod augment;
mod image;
mod ladder;
mod store;
mod synth;

pub use self::augment::{augment, AugmentDraw};
pub use self::image::Image;
pub use self::ladder::{average_frames, build_ladder, Gamma, TemporalLadder, MAX_TL, NATIVE_TLS};
pub use self::store::{
    load_ladder, read_dataset, scene_seed, synthesize_dataset, synthesize_ladders, write_dataset, Dataset,
    DatasetManifest, FileEntry, SceneEntry, SceneRecord, Split, SynthConfig, MANIFEST_FILE, MANIFEST_VERSION,
};
pub use self::synth::{ingest_frames, synth_sequence, FrameSequence, SceneConfig};
