//! Feed-forward Q-network and its optimizer.

mod adam;
mod network;

pub use adam::AdamState;
pub use network::{
    Activation, Architecture, ForwardCache, GradRow, LayerParams, MlpNetwork, ParamVector,
};
