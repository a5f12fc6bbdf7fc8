mod strand;
mod witness;

pub use strand::{
    factorial_share, Coefficient, ExpPoly, IndexFilter, MassFamily, RSequence, Strand, StrandCarrier, StrandId,
    StrandKind,
};
pub use witness::{assemble_witness, Assembly, Group, GroupShape, StrandTerms, Witness, WitnessKind};
