//! Magnetic steganography with NV-centre wide-field magnetometry.
//!
//! Pipeline: encode a payload into a symbol ([`codec`]), lay it out as
//! magnetic and non-magnetic cuboids ([`layout`]), compute the stray field at
//! the sensing plane ([`magnetics`]), turn it into ODMR photoluminescence
//! ([`nvmodel`]) and simulate/decode camera images ([`imaging`]).

pub mod codec;
pub mod grid;
pub mod imaging;
pub mod io;
pub mod layout;
pub mod magnetics;
pub mod nvmodel;
pub mod vec3;

pub use grid::Grid;
