//! Combinatorics of the Laakso construction.

mod boxcount;
mod cell;
mod fiber;
mod point;
mod sequence;

pub use boxcount::{box_counting_dimension, BoxCount};
pub use cell::{cells_at_level, cells_containing, Cell, HalfFace, Side};
pub(crate) use cell::spread_tail;
pub use fiber::{CantorWord, Fiber, FiberLayout, Identification};
pub use point::{LaaksoPointN, LaaksoSpace};
pub use sequence::{Dimension, JMode, JSequence, WormholeSchedule};
