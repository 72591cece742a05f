//! ReLU multilayer perceptron with hand-written backpropagation.

mod gradcheck;
pub mod io;
mod layer;
mod model;

pub use gradcheck::{grad_check, random_grad_check, RandomCheck, relative_error, GRAD_CHECK_SAMPLES};
pub use io::{load_model, load_model_with_loss, save_model, save_model_with_loss, MODEL_FILE_VERSION};
pub use layer::{mlp_spec, Architecture, Layer, LayerSpec, NormOrder, BN_EPS, BN_MOMENTUM};
pub use model::{init_model, ForwardCache, Gradients, MlpModel, Mode};
