//! The gated convolutional classifier.
//!
//! ```text
//! indices ─ embed ─ dropout ─┬─ conv h=3 ─ f(main) ⊙ g(gate) ─ max over time ─┐
//!                            ├─ conv h=4 ─ f(main) ⊙ g(gate) ─ max over time ─┼─ concat ─ dropout ─ dense ─ σ
//!                            └─ conv h=5 ─ f(main) ⊙ g(gate) ─ max over time ─┘
//! ```

mod checkpoint;
mod gate;
mod gates_view;
mod network;
mod params;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use gate::GateKind;
pub use gates_view::{gate_activations, gate_activations_indices, BranchGateMap, PAD_TOKEN};
pub use network::{backward, forward, logits, predict, predict_proba, ForwardCache};
pub use params::{init_model, BranchGrads, ConvBranch, GcnGrads, GcnParams, ModelConfig, ModelMeta};
