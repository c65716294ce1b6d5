//! The unrolled reconstruction network.
//!
//! One azimuth-elevation slice at a time: a stack of learned shrinkage blocks
//! gives a first estimate per azimuth column, a convolutional
//! encoder/decoder with skip connections refines it over the whole slice
//! (complex values enter as real and imaginary channels), and a second
//! shrinkage stack started from the refined slice produces the final image.

mod forward;
mod params;

pub use forward::{
    bind, encode, encode_graph, final_image, forward, forward_graph, fuse, fuse_graph,
    lista_stack_forward, lista_stack_graph, pre_image, reconstruct_volume, StageOutputs,
};
pub use params::{
    analytic_lista_block, analytic_stack, init_params, parameter_count, tensor_names, ConvLayer,
    DoubleConv, ListaBlock, NetParams, NetworkConfig, NetworkParams, UpBlock, DEPTH,
    SPATIAL_MULTIPLE,
};

#[cfg(test)]
mod tests;
