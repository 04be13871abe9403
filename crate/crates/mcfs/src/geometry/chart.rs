use super::{
    forms_from_jet, FormOptions, FundamentalForms, GeometryError, NormalFrame, SurfaceJet, VTensor,
};

/// An immersion sampled on a regular grid in chart coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct ChartPatch {
    pub dim_n: usize,
    pub codim_m: usize,
    pub grid_shape: Vec<usize>,
    pub spacing: Vec<f64>,
    /// Chart coordinates of node `[0, .., 0]`.
    pub origin: Vec<f64>,
    /// `n + m` floats per node, nodes in row-major order.
    pub positions: Vec<f64>,
}

impl ChartPatch {
    pub fn new(
        dim_n: usize,
        codim_m: usize,
        grid_shape: Vec<usize>,
        spacing: Vec<f64>,
        origin: Vec<f64>,
        positions: Vec<f64>,
    ) -> Result<Self, GeometryError> {
        if dim_n < 1 || codim_m < 1 {
            return Err(GeometryError::BadPatch(format!(
                "dimension {dim_n}, codimension {codim_m}"
            )));
        }
        if grid_shape.len() != dim_n || spacing.len() != dim_n || origin.len() != dim_n {
            return Err(GeometryError::BadPatch(
                "axis count does not match dimension".into(),
            ));
        }
        if grid_shape.iter().any(|&s| s < 5) {
            return Err(GeometryError::BadPatch(format!(
                "grid shape {grid_shape:?} has an axis below 5 nodes"
            )));
        }
        if spacing.iter().any(|&h| !(h > 0.0)) {
            return Err(GeometryError::BadPatch("spacing must be positive".into()));
        }
        let count: usize = grid_shape.iter().product();
        if positions.len() != count * (dim_n + codim_m) {
            return Err(GeometryError::BadPatch(format!(
                "expected {} coordinates, got {}",
                count * (dim_n + codim_m),
                positions.len()
            )));
        }
        Ok(ChartPatch {
            dim_n,
            codim_m,
            grid_shape,
            spacing,
            origin,
            positions,
        })
    }

    /// Sample `f` on a grid centered at `center`.
    pub fn sample(
        dim_n: usize,
        codim_m: usize,
        grid_shape: &[usize],
        spacing: &[f64],
        center: &[f64],
        f: impl Fn(&[f64]) -> Vec<f64>,
    ) -> Result<Self, GeometryError> {
        let origin: Vec<f64> = (0..dim_n)
            .map(|a| center[a] - (grid_shape[a] as f64 - 1.0) / 2.0 * spacing[a])
            .collect();
        let count: usize = grid_shape.iter().product();
        let dim = dim_n + codim_m;
        let mut positions = Vec::with_capacity(count * dim);
        let mut idx = vec![0usize; dim_n];
        for _ in 0..count {
            let x: Vec<f64> = (0..dim_n)
                .map(|a| origin[a] + idx[a] as f64 * spacing[a])
                .collect();
            let p = f(&x);
            if p.len() != dim {
                return Err(GeometryError::BadPatch(format!(
                    "sampler returned {} coordinates, expected {dim}",
                    p.len()
                )));
            }
            positions.extend_from_slice(&p);
            for a in (0..dim_n).rev() {
                idx[a] += 1;
                if idx[a] < grid_shape[a] {
                    break;
                }
                idx[a] = 0;
            }
        }
        ChartPatch::new(
            dim_n,
            codim_m,
            grid_shape.to_vec(),
            spacing.to_vec(),
            origin,
            positions,
        )
    }

    pub fn ambient_dim(&self) -> usize {
        self.dim_n + self.codim_m
    }

    pub fn center_node(&self) -> Vec<usize> {
        self.grid_shape.iter().map(|&s| s / 2).collect()
    }

    pub fn coords(&self, node: &[usize]) -> Vec<f64> {
        (0..self.dim_n)
            .map(|a| self.origin[a] + node[a] as f64 * self.spacing[a])
            .collect()
    }

    fn linear(&self, node: &[usize]) -> usize {
        let mut o = 0;
        for (a, &i) in node.iter().enumerate() {
            o = o * self.grid_shape[a] + i;
        }
        o
    }

    pub fn position(&self, node: &[usize]) -> &[f64] {
        let d = self.ambient_dim();
        let o = self.linear(node) * d;
        &self.positions[o..o + d]
    }

    /// Nodes of clearance from the nearest boundary.
    pub fn margin(&self, node: &[usize]) -> usize {
        node.iter()
            .zip(&self.grid_shape)
            .map(|(&i, &s)| i.min(s.saturating_sub(1 + i)))
            .min()
            .unwrap_or(0)
    }

    fn check_node(&self, node: &[usize], need: usize) -> Result<usize, GeometryError> {
        if node.len() != self.dim_n || node.iter().zip(&self.grid_shape).any(|(&i, &s)| i >= s) {
            return Err(GeometryError::BadPatch(format!(
                "node {node:?} outside grid {:?}",
                self.grid_shape
            )));
        }
        let m = self.margin(node);
        if m < need {
            return Err(GeometryError::NotInterior {
                node: node.to_vec(),
                margin: need,
            });
        }
        Ok(m)
    }

    /// Mixed partial derivative; `counts[a]` is the order along axis `a`.
    fn partial(&self, node: &[usize], counts: &[usize], margin: usize) -> Vec<f64> {
        let dim = self.ambient_dim();
        let ops: Vec<(usize, Vec<f64>)> = counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(a, &c)| {
                let (w, denom) = stencil(c, margin);
                let scale = 1.0 / (denom * self.spacing[a].powi(c as i32));
                (a, w.iter().map(|x| x * scale).collect())
            })
            .collect();
        let mut out = vec![0.0; dim];
        let mut pos = vec![0usize; ops.len()];
        let mut at = node.to_vec();
        loop {
            let mut coef = 1.0;
            for (k, (a, w)) in ops.iter().enumerate() {
                let r = (w.len() / 2) as isize;
                coef *= w[pos[k]];
                at[*a] = (node[*a] as isize + pos[k] as isize - r) as usize;
            }
            if coef != 0.0 {
                for (o, x) in out.iter_mut().zip(self.position(&at)) {
                    *o += coef * x;
                }
            }
            let mut k = 0;
            loop {
                if k == ops.len() {
                    return out;
                }
                pos[k] += 1;
                if pos[k] < ops[k].1.len() {
                    break;
                }
                pos[k] = 0;
                k += 1;
            }
        }
    }

    /// Finite-difference jet up to `order` (2, 3 or 4) at an interior node.
    pub fn jet(&self, node: &[usize], order: usize) -> Result<SurfaceJet, GeometryError> {
        let need = if order >= 4 { 3 } else { 2 };
        let margin = self.check_node(node, need)?;
        let n = self.dim_n;
        let dim = self.ambient_dim();
        let mut tensors = Vec::new();
        for rank in 1..=order.min(4) {
            let mut t = VTensor::zeros(n, rank, dim);
            t.fill_symmetric(|key| {
                let mut counts = vec![0; n];
                for &a in key {
                    counts[a] += 1;
                }
                self.partial(node, &counts, margin)
            });
            tensors.push(t);
        }
        let mut it = tensors.into_iter();
        let d1 = it.next().expect("order >= 1");
        let d2 = it
            .next()
            .ok_or_else(|| GeometryError::BadPatch("jet order below 2".into()))?;
        Ok(SurfaceJet {
            d1,
            d2,
            d3: it.next(),
            d4: it.next(),
        })
    }
}

/// 1-D central stencil weights and their denominator. Fourth order where
/// the clearance allows it, second order for 3rd/4th derivatives two nodes in.
fn stencil(order: usize, margin: usize) -> (&'static [f64], f64) {
    match (order, margin >= 3) {
        (1, _) => (&[1.0, -8.0, 0.0, 8.0, -1.0], 12.0),
        (2, _) => (&[-1.0, 16.0, -30.0, 16.0, -1.0], 12.0),
        (3, true) => (&[1.0, -8.0, 13.0, 0.0, -13.0, 8.0, -1.0], 8.0),
        (3, false) => (&[-1.0, 2.0, 0.0, -2.0, 1.0], 2.0),
        (4, true) => (&[-1.0, 12.0, -39.0, 56.0, -39.0, 12.0, -1.0], 6.0),
        (4, false) => (&[1.0, -4.0, 6.0, -4.0, 1.0], 1.0),
        _ => panic!("no stencil for derivative order {order}"),
    }
}

/// Fundamental forms at an interior node (two nodes from every boundary).
/// Derivative norms are filled in when the node has three nodes of clearance.
pub fn fundamental_forms(
    patch: &ChartPatch,
    node: &[usize],
) -> Result<FundamentalForms, GeometryError> {
    fundamental_forms_with(patch, node, &FormOptions::default(), None)
}

pub fn fundamental_forms_with(
    patch: &ChartPatch,
    node: &[usize],
    opts: &FormOptions,
    seed: Option<&NormalFrame>,
) -> Result<FundamentalForms, GeometryError> {
    patch.check_node(node, 2)?;
    let order = if opts.hessian && patch.margin(node) >= 3 {
        4
    } else {
        3
    };
    let jet = patch.jet(node, order)?;
    let mut opts = *opts;
    if patch.margin(node) < 3 {
        opts.derivatives = false;
    }
    forms_from_jet(&jet, &opts, seed)
}

/// Fundamental forms at a sequence of nodes with the normal frame carried
/// from each node to the next.
pub fn fundamental_forms_along(
    patch: &ChartPatch,
    nodes: &[Vec<usize>],
    opts: &FormOptions,
) -> Vec<Result<FundamentalForms, GeometryError>> {
    let mut seed: Option<NormalFrame> = None;
    nodes
        .iter()
        .map(|node| {
            let r = fundamental_forms_with(patch, node, opts, seed.as_ref());
            if let Ok(ff) = &r {
                seed = Some(ff.frame.clone());
            }
            r
        })
        .collect()
}

/// `(|∇A|, |∇H|, |∇²A|)` at a node three or more nodes from the boundary.
pub fn derivative_norms(
    patch: &ChartPatch,
    node: &[usize],
) -> Result<(f64, f64, f64), GeometryError> {
    patch.check_node(node, 3)?;
    let jet = patch.jet(node, 4)?;
    let opts = FormOptions {
        torsion: false,
        derivatives: true,
        hessian: true,
        ..Default::default()
    };
    let ff = forms_from_jet(&jet, &opts, None)?;
    Ok((
        ff.grad_a_norm.expect("derivatives requested"),
        ff.grad_h_norm.expect("derivatives requested"),
        ff.hess_a_norm.expect("hessian requested"),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stencils_are_exact_on_monomials() {
        let h = 0.1;
        for (order, margin) in [(1, 3), (2, 3), (3, 3), (3, 2), (4, 3), (4, 2)] {
            let (w, d) = stencil(order, margin);
            let r = (w.len() / 2) as i32;
            let got: f64 = w
                .iter()
                .enumerate()
                .map(|(k, c)| c * ((k as i32 - r) as f64 * h).powi(order as i32))
                .sum::<f64>()
                / (d * h.powi(order as i32));
            let fact: f64 = (1..=order).map(|x| x as f64).product();
            assert!(
                (got - fact).abs() < 1e-9,
                "order {order} margin {margin}: {got}"
            );
        }
    }

    #[test]
    fn small_grid_is_rejected() {
        let r = ChartPatch::sample(2, 1, &[4, 5], &[0.1, 0.1], &[0.0, 0.0], |x| {
            vec![x[0], x[1], 0.0]
        });
        assert!(matches!(r, Err(GeometryError::BadPatch(_))));
    }

    #[test]
    fn boundary_node_is_rejected() {
        let p = ChartPatch::sample(2, 1, &[7, 7], &[0.1, 0.1], &[0.0, 0.0], |x| {
            vec![x[0], x[1], 0.0]
        })
        .unwrap();
        assert!(matches!(
            fundamental_forms(&p, &[1, 3]),
            Err(GeometryError::NotInterior { .. })
        ));
        assert!(matches!(
            derivative_norms(&p, &[2, 3]),
            Err(GeometryError::NotInterior { .. })
        ));
    }
}
