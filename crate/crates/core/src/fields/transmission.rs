use serde::Serialize;

/// Interface jumps of a piecewise solution: the trace jump `h0 = u₊ − u₋`
/// at interface nodes and the conormal flux jump
/// `h1 = A₊∇u₊·ν − A₋∇u₋·ν` on interface edges, with `ν` the normal
/// pointing from the plus side into the minus side.
#[derive(Clone, Debug, Default, Serialize)]
pub struct TransmissionData {
    pub h0: Vec<f64>,
    pub h1: Vec<f64>,
    /// Length of each interface edge, aligned with `h1`.
    pub edge_lengths: Vec<f64>,
}

impl TransmissionData {
    pub fn h0_max(&self) -> f64 {
        self.h0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `(Σ_e |e| h1_e²)^{1/2}`
    pub fn h1_l2(&self) -> f64 {
        self.h1
            .iter()
            .zip(&self.edge_lengths)
            .map(|(j, l)| l * j * j)
            .sum::<f64>()
            .sqrt()
    }

    /// `(Σ_e |e|² h1_e²)^{1/2}`: the edge-length weighted jump, a discrete
    /// surrogate for a negative-order norm of the flux residual.
    pub fn h1_weighted(&self) -> f64 {
        self.h1
            .iter()
            .zip(&self.edge_lengths)
            .map(|(j, l)| l * l * j * j)
            .sum::<f64>()
            .sqrt()
    }
}
