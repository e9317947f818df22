//! File formats: gaze streams in, `SACKIT` containers for everything derived.

pub mod container;
pub mod stream;

pub use container::{
    read_dataset, read_means, read_model, read_traces, write_dataset, write_means, write_model, write_traces,
};
pub use stream::{read_gaze_stream, write_gaze_stream, StreamFormat};
