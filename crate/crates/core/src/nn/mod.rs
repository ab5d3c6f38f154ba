//! Small reverse-mode convolutional network engine and the grasp network
//! built on it.

mod checkpoint;
mod model;
mod ops;
mod tape;
mod tensor;

pub use checkpoint::{
    load_checkpoint, load_checkpoint_file, load_checkpoint_for, save_checkpoint, save_checkpoint_file,
    CHECKPOINT_VERSION,
};
pub use model::{DepthScale, Layer, LayerGroup, Mode, NetConfig, NetInput, NetOutputs, NetworkParams, Prediction};
pub use ops::{concat, conv2d, fuse, maxpool2, scale_by_map, upsample2};
#[doc(hidden)]
pub use tape::BackwardFault;
pub use tape::{Gradients, LayerGrad, NodeId, Tape};
pub use tensor::Tensor;

#[cfg(test)]
pub(crate) fn conv2d_backward_for_tests(x: &Tensor, w: &[f64], cout: usize, k: usize, dy: &Tensor) -> (Vec<f64>, Vec<f64>) {
    ops::conv2d_backward(x, w, cout, k, dy, false, true).dw.expect("requested")
}
