use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure mode the library reports. Variants are deliberately
/// distinct so callers (and the CLI) can react to the kind, not the text.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: {left} vs {right}")]
    ShapeMismatch {
        context: &'static str,
        left: String,
        right: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("target map is not binary: found {0}")]
    NonBinaryTarget(f64),

    #[error("convolution output dimension is not positive: input {input}, kernel {kernel}, stride {stride}, padding {padding}")]
    EmptyConvOutput {
        input: String,
        kernel: String,
        stride: usize,
        padding: usize,
    },

    #[error("upsample cannot shrink: input {in_h}x{in_w}, requested {out_h}x{out_w}")]
    UpsampleShrink {
        in_h: usize,
        in_w: usize,
        out_h: usize,
        out_w: usize,
    },

    #[error("backward root must be a scalar, got shape {0}")]
    NonScalarRoot(String),

    #[error("spatial dims {h}x{w} not divisible by {divisor} (network depth {depth})")]
    IndivisibleInput {
        h: usize,
        w: usize,
        divisor: usize,
        depth: usize,
    },

    #[error("input {h}x{w} too small for {layers} stride-2 layers")]
    InputTooSmall { h: usize, w: usize, layers: usize },

    #[error("labels contain a single class ({0}); AUC is undefined")]
    SingleClassLabels(&'static str),

    #[error("no positive labels; PR AUC is undefined")]
    NoPositiveLabels,

    #[error("bad magic in {path}: expected {expected}, found {found}")]
    BadMagic {
        path: String,
        expected: String,
        found: String,
    },

    #[error("malformed header in {path}: {detail}")]
    MalformedHeader { path: String, detail: String },

    #[error("truncated payload in {path}: expected {expected} bytes, got {got}")]
    TruncatedPayload {
        path: String,
        expected: usize,
        got: usize,
    },

    #[error("checkpoint error in {path}: {detail}")]
    Checkpoint { path: String, detail: String },

    #[error("manifest error in {path} line {line}: {detail}")]
    Manifest {
        path: String,
        line: usize,
        detail: String,
    },

    #[error("training diverged at iteration {iteration}: {term} is not finite")]
    Divergence { iteration: u64, term: &'static str },

    #[error("dataset is unusable: {0}")]
    EmptyDataset(&'static str),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Stable machine-readable tag, used by the CLI's one-line error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::ShapeMismatch { .. } => "shape_mismatch",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::NonBinaryTarget(_) => "non_binary_target",
            Error::EmptyConvOutput { .. } => "empty_conv_output",
            Error::UpsampleShrink { .. } => "upsample_shrink",
            Error::NonScalarRoot(_) => "non_scalar_root",
            Error::IndivisibleInput { .. } => "indivisible_input",
            Error::InputTooSmall { .. } => "input_too_small",
            Error::SingleClassLabels(_) => "single_class_labels",
            Error::NoPositiveLabels => "no_positive_labels",
            Error::BadMagic { .. } => "bad_magic",
            Error::MalformedHeader { .. } => "malformed_header",
            Error::TruncatedPayload { .. } => "truncated_payload",
            Error::Checkpoint { .. } => "checkpoint",
            Error::Manifest { .. } => "manifest",
            Error::Divergence { .. } => "divergence",
            Error::EmptyDataset(_) => "empty_dataset",
            Error::Io { .. } => "io",
        }
    }

    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
