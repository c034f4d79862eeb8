use std::collections::HashMap;

use super::{NumError, Result, Tensor};

/// Handle to a node in a [`Graph`]. Nodes are stored in topological order by
/// construction: an op can only reference ids returned earlier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Clone, Debug)]
enum Expr {
    Input(usize),
    Param(usize),
    Const(Tensor),
    /// x·W + b. x is [k] or [B,k], W is [k,m], b is [m].
    Affine { x: NodeId, w: NodeId, b: NodeId },
    /// 1-D convolution over the trailing (horizon) axis.
    /// x is [C_in, L], w is [C_out, C_in, K], b is [C_out].
    Conv1d { x: NodeId, w: NodeId, b: NodeId, stride: usize, pad: usize },
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    /// Per-channel scale of [C, L] by [C] (broadcast over L).
    MulChannel { x: NodeId, g: NodeId },
    /// Per-channel shift of [C, L] by [C] (broadcast over L).
    AddChannel { x: NodeId, b: NodeId },
    Scale { x: NodeId, c: f64 },
    AddScalar { x: NodeId, c: f64 },
    Clamp { x: NodeId, lo: f64, hi: f64 },
    Sigmoid(NodeId),
    Silu(NodeId),
    Softplus(NodeId),
    Ln(NodeId),
    /// Normalize to zero mean / unit variance. Rank 1: over the whole vector;
    /// rank 2 [C, L]: over channels independently for each position.
    LayerNorm { x: NodeId, eps: f64 },
    /// Max over rows of [N, F] -> [F]; ties resolved to the lowest row index.
    MaxPoolRows(NodeId),
    /// Concatenate along axis 0; trailing dims must agree.
    Concat(Vec<NodeId>),
    /// Index the trailing axis; used for nearest-neighbor upsampling.
    GatherLast { x: NodeId, idx: Vec<usize> },
    SumAll(NodeId),
    /// Identity value, gradient barrier.
    Detach(NodeId),
}

#[derive(Clone, Debug)]
struct Node {
    expr: Expr,
    shape: Vec<usize>,
}

/// Ordered, named collection of parameter tensors shared by one model.
#[derive(Clone, Debug, Default)]
pub struct ParamSet {
    names: Vec<String>,
    tensors: Vec<Tensor>,
    index: HashMap<String, usize>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, tensor: Tensor) -> Result<()> {
        if self.index.contains_key(name) {
            return Err(NumError::DuplicateName(name.to_string()));
        }
        self.index.insert(name.to_string(), self.tensors.len());
        self.names.push(name.to_string());
        self.tensors.push(tensor.with_requires_grad(true));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.position(name).map(|i| &self.tensors[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.index.get(name).copied().map(move |i| &mut self.tensors[i])
    }

    pub fn name_at(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn tensor_at(&self, i: usize) -> &Tensor {
        &self.tensors[i]
    }

    pub fn tensor_at_mut(&mut self, i: usize) -> &mut Tensor {
        &mut self.tensors[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(|n| n.as_str()).zip(self.tensors.iter())
    }

    /// Total number of scalar parameters.
    pub fn total_len(&self) -> usize {
        self.tensors.iter().map(|t| t.len()).sum()
    }
}

/// Per-parameter gradients aligned with a [`ParamSet`]'s order.
/// Parameters that do not reach the differentiated output get zero gradients.
#[derive(Clone, Debug)]
pub struct NamedGrads {
    grads: Vec<Tensor>,
}

impl NamedGrads {
    pub fn from_grads(grads: Vec<Tensor>) -> Self {
        Self { grads }
    }

    pub fn grad_at(&self, i: usize) -> &Tensor {
        &self.grads[i]
    }

    pub fn get<'a>(&'a self, params: &ParamSet, name: &str) -> Option<&'a Tensor> {
        params.position(name).map(|i| &self.grads[i])
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    /// grads += other * scale, elementwise. Shapes must already agree.
    pub fn accumulate_scaled(&mut self, other: &NamedGrads, scale: f64) {
        for (a, b) in self.grads.iter_mut().zip(other.grads.iter()) {
            for (x, y) in a.data_mut().iter_mut().zip(b.data().iter()) {
                *x += scale * y;
            }
        }
    }

    pub fn scale(&mut self, scale: f64) {
        for g in self.grads.iter_mut() {
            for x in g.data_mut().iter_mut() {
                *x *= scale;
            }
        }
    }

    pub fn zeros_like(params: &ParamSet) -> Self {
        Self { grads: params.tensors.iter().map(|t| Tensor::zeros(t.shape())).collect() }
    }
}

/// Values produced by one forward pass of a [`Graph`].
pub struct Execution {
    values: Vec<Option<Tensor>>,
}

impl Execution {
    /// Value of an arbitrary node. Parameter nodes are not materialized here.
    pub fn value(&self, id: NodeId) -> Option<&Tensor> {
        self.values[id.0].as_ref()
    }
}

/// Retained computation graph over named inputs and named parameters.
#[derive(Clone, Debug)]
pub struct Graph {
    nodes: Vec<Node>,
    inputs: Vec<(String, Vec<usize>)>,
    params: Vec<(String, Vec<usize>)>,
    outputs: Vec<(String, NodeId)>,
    input_index: HashMap<String, usize>,
    input_node: Vec<NodeId>,
    param_node: Vec<NodeId>,
    output_index: HashMap<String, NodeId>,
}

impl Graph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn output_id(&self, name: &str) -> Result<NodeId> {
        self.output_index.get(name).copied().ok_or_else(|| NumError::UnknownName(name.to_string()))
    }

    pub fn node_shape(&self, id: NodeId) -> &[usize] {
        &self.nodes[id.0].shape
    }

    fn check_params(&self, params: &ParamSet) -> Result<()> {
        for (name, shape) in &self.params {
            let t = params
                .get(name)
                .ok_or_else(|| NumError::UnknownName(format!("parameter {name}")))?;
            if t.shape() != shape.as_slice() {
                return Err(NumError::ShapeMismatch {
                    context: "Graph::forward params",
                    detail: format!("{name}: declared {:?}, provided {:?}", shape, t.shape()),
                });
            }
        }
        Ok(())
    }

    /// Evaluate every node given bound inputs and parameter values.
    ///
    /// Deterministic: identical inputs and parameters give bitwise-identical
    /// outputs. Any non-finite intermediate is an error.
    pub fn forward(&self, params: &ParamSet, bound: &[(&str, &Tensor)]) -> Result<Execution> {
        self.check_params(params)?;
        let mut slot_values: Vec<Option<&Tensor>> = vec![None; self.inputs.len()];
        for (name, tensor) in bound {
            let slot = *self
                .input_index
                .get(*name)
                .ok_or_else(|| NumError::UnknownName(format!("input {name}")))?;
            let declared = &self.inputs[slot].1;
            if tensor.shape() != declared.as_slice() {
                return Err(NumError::ShapeMismatch {
                    context: "Graph::forward inputs",
                    detail: format!("{name}: declared {:?}, provided {:?}", declared, tensor.shape()),
                });
            }
            slot_values[slot] = Some(tensor);
        }
        if let Some(missing) = slot_values.iter().position(|v| v.is_none()) {
            return Err(NumError::UnknownName(format!("input {} not bound", self.inputs[missing].0)));
        }

        let mut values: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        for i in 0..self.nodes.len() {
            let out = match &self.nodes[i].expr {
                Expr::Input(slot) => Some(slot_values[*slot].unwrap().clone()),
                Expr::Param(_) => None, // resolved through the ParamSet on use
                Expr::Const(t) => Some(t.clone()),
                expr => Some(self.eval_op(expr, params, &values)?),
            };
            if let Some(t) = &out {
                t.check_finite(&format!("node {} ({})", i, op_name(&self.nodes[i].expr)))?;
            }
            values[i] = out;
        }
        // Materialize parameter-valued outputs so callers can read them.
        for (_, id) in &self.outputs {
            if values[id.0].is_none() {
                if let Expr::Param(slot) = &self.nodes[id.0].expr {
                    let name = &self.params[*slot].0;
                    values[id.0] = Some(params.get(name).unwrap().clone());
                }
            }
        }
        Ok(Execution { values })
    }

    /// Named output of an execution.
    pub fn output<'a>(&self, exec: &'a Execution, name: &str) -> Result<&'a Tensor> {
        let id = self.output_id(name)?;
        exec.values[id.0].as_ref().ok_or(NumError::BackwardBeforeForward)
    }

    fn value_of<'a>(
        &'a self,
        params: &'a ParamSet,
        values: &'a [Option<Tensor>],
        id: NodeId,
    ) -> &'a Tensor {
        match &self.nodes[id.0].expr {
            Expr::Param(slot) => params.get(&self.params[*slot].0).unwrap(),
            _ => values[id.0].as_ref().expect("topological order guarantees evaluation"),
        }
    }

    fn eval_op(&self, expr: &Expr, params: &ParamSet, values: &[Option<Tensor>]) -> Result<Tensor> {
        let v = |id: NodeId| self.value_of(params, values, id);
        Ok(match expr {
            Expr::Input(_) | Expr::Param(_) | Expr::Const(_) => unreachable!("leaves handled by caller"),
            Expr::Affine { x, w, b } => affine_forward(v(*x), v(*w), v(*b)),
            Expr::Conv1d { x, w, b, stride, pad } => conv1d_forward(v(*x), v(*w), v(*b), *stride, *pad),
            Expr::Add(a, b) => zip_map(v(*a), v(*b), |x, y| x + y),
            Expr::Mul(a, b) => zip_map(v(*a), v(*b), |x, y| x * y),
            Expr::MulChannel { x, g } => channel_map(v(*x), v(*g), |x, y| x * y),
            Expr::AddChannel { x, b } => channel_map(v(*x), v(*b), |x, y| x + y),
            Expr::Scale { x, c } => unary_map(v(*x), |t| t * c),
            Expr::AddScalar { x, c } => unary_map(v(*x), |t| t + c),
            Expr::Clamp { x, lo, hi } => unary_map(v(*x), |t| t.clamp(*lo, *hi)),
            Expr::Sigmoid(x) => unary_map(v(*x), |t| sigmoid(t)),
            Expr::Silu(x) => unary_map(v(*x), |t| t * sigmoid(t)),
            Expr::Softplus(x) => unary_map(v(*x), |t| softplus(t)),
            Expr::Ln(x) => unary_map(v(*x), |t| t.ln()),
            Expr::LayerNorm { x, eps } => layer_norm_forward(v(*x), *eps),
            Expr::MaxPoolRows(x) => max_pool_rows_forward(v(*x)),
            Expr::Concat(parts) => concat_forward(&parts.iter().map(|p| v(*p)).collect::<Vec<_>>()),
            Expr::GatherLast { x, idx } => gather_last_forward(v(*x), idx),
            Expr::SumAll(x) => Tensor::scalar(v(*x).data().iter().sum()),
            Expr::Detach(x) => v(*x).clone(),
        })
    }

    /// Reverse-mode gradients of a scalar named output with respect to every
    /// parameter in `params`. Parameters not on a path to the output get
    /// zero gradients.
    pub fn backward(&self, params: &ParamSet, exec: &Execution, output: &str) -> Result<NamedGrads> {
        let out_id = self.output_id(output)?;
        let out_val = exec.values[out_id.0].as_ref().ok_or(NumError::BackwardBeforeForward)?;
        if out_val.len() != 1 {
            return Err(NumError::NonScalarOutput { shape: out_val.shape().to_vec() });
        }

        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[out_id.0] = Some(Tensor::scalar(1.0));

        for i in (0..self.nodes.len()).rev() {
            let Some(g) = grads[i].take() else { continue };
            let v = |id: NodeId| self.value_of(params, &exec.values, id);
            match &self.nodes[i].expr {
                Expr::Input(_) | Expr::Param(_) | Expr::Const(_) | Expr::Detach(_) => {
                    if let Expr::Param(_) = &self.nodes[i].expr {
                        grads[i] = Some(g); // keep for collection below
                    }
                    continue;
                }
                Expr::Affine { x, w, b } => {
                    let (dx, dw, db) = affine_backward(v(*x), v(*w), &g);
                    accumulate(&mut grads, *x, dx);
                    accumulate(&mut grads, *w, dw);
                    accumulate(&mut grads, *b, db);
                }
                Expr::Conv1d { x, w, b: bias, stride, pad } => {
                    let (dx, dw, db) = conv1d_backward(v(*x), v(*w), &g, *stride, *pad);
                    accumulate(&mut grads, *x, dx);
                    accumulate(&mut grads, *w, dw);
                    accumulate(&mut grads, *bias, db);
                }
                Expr::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g);
                }
                Expr::Mul(a, b) => {
                    let da = zip_map(&g, v(*b), |gi, bi| gi * bi);
                    let db = zip_map(&g, v(*a), |gi, ai| gi * ai);
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Expr::MulChannel { x, g: gain } => {
                    let dx = channel_map(&g, v(*gain), |gi, gn| gi * gn);
                    let dgain = channel_reduce(&g, v(*x));
                    accumulate(&mut grads, *x, dx);
                    accumulate(&mut grads, *gain, dgain);
                }
                Expr::AddChannel { x, b } => {
                    let db = channel_sum(&g);
                    accumulate(&mut grads, *x, g);
                    accumulate(&mut grads, *b, db);
                }
                Expr::Scale { x, c } => {
                    accumulate(&mut grads, *x, unary_map(&g, |t| t * c));
                }
                Expr::AddScalar { x, .. } => {
                    accumulate(&mut grads, *x, g);
                }
                Expr::Clamp { x, lo, hi } => {
                    let xv = v(*x);
                    let dx = zip_map(&g, xv, |gi, xi| if xi > *lo && xi < *hi { gi } else { 0.0 });
                    accumulate(&mut grads, *x, dx);
                }
                Expr::Sigmoid(x) => {
                    let yv = exec.values[i].as_ref().unwrap();
                    let dx = zip_map(&g, yv, |gi, yi| gi * yi * (1.0 - yi));
                    accumulate(&mut grads, *x, dx);
                }
                Expr::Silu(x) => {
                    let xv = v(*x);
                    let dx = zip_map(&g, xv, |gi, xi| {
                        let s = sigmoid(xi);
                        gi * s * (1.0 + xi * (1.0 - s))
                    });
                    accumulate(&mut grads, *x, dx);
                }
                Expr::Softplus(x) => {
                    let xv = v(*x);
                    let dx = zip_map(&g, xv, |gi, xi| gi * sigmoid(xi));
                    accumulate(&mut grads, *x, dx);
                }
                Expr::Ln(x) => {
                    let xv = v(*x);
                    let dx = zip_map(&g, xv, |gi, xi| gi / xi);
                    accumulate(&mut grads, *x, dx);
                }
                Expr::LayerNorm { x, eps } => {
                    let dx = layer_norm_backward(v(*x), &g, *eps);
                    accumulate(&mut grads, *x, dx);
                }
                Expr::MaxPoolRows(x) => {
                    let dx = max_pool_rows_backward(v(*x), &g);
                    accumulate(&mut grads, *x, dx);
                }
                Expr::Concat(parts) => {
                    let mut offset = 0;
                    for part in parts {
                        let pv_len = self.nodes[part.0].shape.iter().product::<usize>();
                        let mut dp = Tensor::zeros(&self.nodes[part.0].shape);
                        dp.data_mut().copy_from_slice(&g.data()[offset..offset + pv_len]);
                        offset += pv_len;
                        accumulate(&mut grads, *part, dp);
                    }
                }
                Expr::GatherLast { x, idx } => {
                    let dx = gather_last_backward(&self.nodes[x.0].shape, &g, idx);
                    accumulate(&mut grads, *x, dx);
                }
                Expr::SumAll(x) => {
                    let gv = g.data()[0];
                    accumulate(&mut grads, *x, Tensor::full(&self.nodes[x.0].shape, gv));
                }
            }
        }

        // Collect into ParamSet order; untouched parameters get zeros.
        let mut out = Vec::with_capacity(params.len());
        let mut by_name: HashMap<&str, Tensor> = HashMap::new();
        for (slot, (name, _)) in self.params.iter().enumerate() {
            if let Some(g) = grads[self.param_node[slot].0].take() {
                by_name.insert(name.as_str(), g);
            }
        }
        for i in 0..params.len() {
            let name = params.name_at(i);
            let g = by_name
                .remove(name)
                .unwrap_or_else(|| Tensor::zeros(params.tensor_at(i).shape()));
            g.check_finite(&format!("gradient of {name}"))?;
            out.push(g);
        }
        Ok(NamedGrads { grads: out })
    }
}

fn accumulate(grads: &mut [Option<Tensor>], id: NodeId, contribution: Tensor) {
    match &mut grads[id.0] {
        Some(existing) => {
            for (a, b) in existing.data_mut().iter_mut().zip(contribution.data().iter()) {
                *a += b;
            }
        }
        slot @ None => *slot = Some(contribution),
    }
}

fn op_name(expr: &Expr) -> &'static str {
    match expr {
        Expr::Input(_) => "input",
        Expr::Param(_) => "param",
        Expr::Const(_) => "const",
        Expr::Affine { .. } => "affine",
        Expr::Conv1d { .. } => "conv1d",
        Expr::Add(..) => "add",
        Expr::Mul(..) => "mul",
        Expr::MulChannel { .. } => "mul_channel",
        Expr::AddChannel { .. } => "add_channel",
        Expr::Scale { .. } => "scale",
        Expr::AddScalar { .. } => "add_scalar",
        Expr::Clamp { .. } => "clamp",
        Expr::Sigmoid(_) => "sigmoid",
        Expr::Silu(_) => "silu",
        Expr::Softplus(_) => "softplus",
        Expr::Ln(_) => "ln",
        Expr::LayerNorm { .. } => "layer_norm",
        Expr::MaxPoolRows(_) => "max_pool_rows",
        Expr::Concat(_) => "concat",
        Expr::GatherLast { .. } => "gather_last",
        Expr::SumAll(_) => "sum_all",
        Expr::Detach(_) => "detach",
    }
}

/// Incremental graph constructor. Shape inference runs at build time so op
/// wiring errors surface before any data flows.
#[derive(Default)]
pub struct GraphBuilder {
    nodes: Vec<Node>,
    inputs: Vec<(String, Vec<usize>)>,
    params: Vec<(String, Vec<usize>)>,
    outputs: Vec<(String, NodeId)>,
    input_index: HashMap<String, usize>,
    input_node: Vec<NodeId>,
    param_index: HashMap<String, usize>,
    param_node: Vec<NodeId>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, expr: Expr, shape: Vec<usize>) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node { expr, shape });
        id
    }

    fn shape(&self, id: NodeId) -> &[usize] {
        &self.nodes[id.0].shape
    }

    pub fn input(&mut self, name: &str, shape: &[usize]) -> Result<NodeId> {
        if self.input_index.contains_key(name) {
            return Err(NumError::DuplicateName(name.to_string()));
        }
        let slot = self.inputs.len();
        self.inputs.push((name.to_string(), shape.to_vec()));
        self.input_index.insert(name.to_string(), slot);
        let id = self.push(Expr::Input(slot), shape.to_vec());
        self.input_node.push(id);
        Ok(id)
    }

    pub fn param(&mut self, name: &str, shape: &[usize]) -> Result<NodeId> {
        if let Some(slot) = self.param_index.get(name) {
            // Sharing a parameter between graph branches reuses its node.
            if self.params[*slot].1 != shape {
                return Err(NumError::ShapeMismatch {
                    context: "GraphBuilder::param",
                    detail: format!("{name} redeclared with different shape"),
                });
            }
            return Ok(self.param_node[*slot]);
        }
        let slot = self.params.len();
        self.params.push((name.to_string(), shape.to_vec()));
        self.param_index.insert(name.to_string(), slot);
        let id = self.push(Expr::Param(slot), shape.to_vec());
        self.param_node.push(id);
        Ok(id)
    }

    pub fn constant(&mut self, t: Tensor) -> NodeId {
        let shape = t.shape().to_vec();
        self.push(Expr::Const(t), shape)
    }

    pub fn affine(&mut self, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
        let (xs, ws, bs) = (self.shape(x), self.shape(w), self.shape(b));
        let (k, batch) = match xs {
            [k] => (*k, None),
            [bsz, k] => (*k, Some(*bsz)),
            _ => {
                return Err(NumError::ShapeMismatch {
                    context: "affine",
                    detail: format!("x must be rank 1 or 2, got {xs:?}"),
                })
            }
        };
        if ws.len() != 2 || ws[0] != k || bs != [ws[1]] {
            return Err(NumError::ShapeMismatch {
                context: "affine",
                detail: format!("x {xs:?} · w {ws:?} + b {bs:?}"),
            });
        }
        let m = ws[1];
        let shape = match batch {
            Some(bsz) => vec![bsz, m],
            None => vec![m],
        };
        Ok(self.push(Expr::Affine { x, w, b }, shape))
    }

    pub fn conv1d(&mut self, x: NodeId, w: NodeId, b: NodeId, stride: usize, pad: usize) -> Result<NodeId> {
        let (xs, ws, bs) = (self.shape(x), self.shape(w), self.shape(b));
        if xs.len() != 2 || ws.len() != 3 || bs.len() != 1 || ws[1] != xs[0] || bs[0] != ws[0] {
            return Err(NumError::ShapeMismatch {
                context: "conv1d",
                detail: format!("x {xs:?}, w {ws:?}, b {bs:?}"),
            });
        }
        let (l, k) = (xs[1], ws[2]);
        if l + 2 * pad < k || stride == 0 {
            return Err(NumError::ShapeMismatch {
                context: "conv1d",
                detail: format!("kernel {k} too large for length {l} with pad {pad}"),
            });
        }
        let l_out = (l + 2 * pad - k) / stride + 1;
        Ok(self.push(Expr::Conv1d { x, w, b, stride, pad }, vec![ws[0], l_out]))
    }

    fn same_shape(&self, a: NodeId, b: NodeId, context: &'static str) -> Result<Vec<usize>> {
        if self.shape(a) != self.shape(b) {
            return Err(NumError::ShapeMismatch {
                context,
                detail: format!("{:?} vs {:?}", self.shape(a), self.shape(b)),
            });
        }
        Ok(self.shape(a).to_vec())
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let shape = self.same_shape(a, b, "add")?;
        Ok(self.push(Expr::Add(a, b), shape))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let shape = self.same_shape(a, b, "mul")?;
        Ok(self.push(Expr::Mul(a, b), shape))
    }

    fn channel_check(&self, x: NodeId, c: NodeId, context: &'static str) -> Result<Vec<usize>> {
        let (xs, cs) = (self.shape(x), self.shape(c));
        if xs.len() != 2 || cs != [xs[0]] {
            return Err(NumError::ShapeMismatch {
                context,
                detail: format!("x {xs:?} with channel vector {cs:?}"),
            });
        }
        Ok(xs.to_vec())
    }

    pub fn mul_channel(&mut self, x: NodeId, g: NodeId) -> Result<NodeId> {
        let shape = self.channel_check(x, g, "mul_channel")?;
        Ok(self.push(Expr::MulChannel { x, g }, shape))
    }

    pub fn add_channel(&mut self, x: NodeId, b: NodeId) -> Result<NodeId> {
        let shape = self.channel_check(x, b, "add_channel")?;
        Ok(self.push(Expr::AddChannel { x, b }, shape))
    }

    pub fn scale(&mut self, x: NodeId, c: f64) -> NodeId {
        let shape = self.shape(x).to_vec();
        self.push(Expr::Scale { x, c }, shape)
    }

    pub fn add_scalar(&mut self, x: NodeId, c: f64) -> NodeId {
        let shape = self.shape(x).to_vec();
        self.push(Expr::AddScalar { x, c }, shape)
    }

    pub fn clamp(&mut self, x: NodeId, lo: f64, hi: f64) -> NodeId {
        let shape = self.shape(x).to_vec();
        self.push(Expr::Clamp { x, lo, hi }, shape)
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        let shape = self.shape(x).to_vec();
        self.push(Expr::Sigmoid(x), shape)
    }

    pub fn silu(&mut self, x: NodeId) -> NodeId {
        let shape = self.shape(x).to_vec();
        self.push(Expr::Silu(x), shape)
    }

    pub fn softplus(&mut self, x: NodeId) -> NodeId {
        let shape = self.shape(x).to_vec();
        self.push(Expr::Softplus(x), shape)
    }

    pub fn ln(&mut self, x: NodeId) -> NodeId {
        let shape = self.shape(x).to_vec();
        self.push(Expr::Ln(x), shape)
    }

    pub fn layer_norm(&mut self, x: NodeId) -> Result<NodeId> {
        let shape = self.shape(x).to_vec();
        if shape.is_empty() || shape.len() > 2 {
            return Err(NumError::ShapeMismatch {
                context: "layer_norm",
                detail: format!("rank 1 or 2 required, got {shape:?}"),
            });
        }
        Ok(self.push(Expr::LayerNorm { x, eps: 1e-5 }, shape))
    }

    pub fn max_pool_rows(&mut self, x: NodeId) -> Result<NodeId> {
        let xs = self.shape(x);
        if xs.len() != 2 {
            return Err(NumError::ShapeMismatch {
                context: "max_pool_rows",
                detail: format!("[rows, features] required, got {xs:?}"),
            });
        }
        let shape = vec![xs[1]];
        Ok(self.push(Expr::MaxPoolRows(x), shape))
    }

    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(NumError::ShapeMismatch { context: "concat", detail: "no parts".into() });
        }
        let first = self.shape(parts[0]).to_vec();
        let mut axis0 = 0usize;
        for p in parts {
            let s = self.shape(*p);
            if s.len() != first.len() || s[1..] != first[1..] {
                return Err(NumError::ShapeMismatch {
                    context: "concat",
                    detail: format!("{s:?} vs {first:?}"),
                });
            }
            axis0 += s[0];
        }
        let mut shape = first;
        shape[0] = axis0;
        Ok(self.push(Expr::Concat(parts.to_vec()), shape))
    }

    pub fn gather_last(&mut self, x: NodeId, idx: Vec<usize>) -> Result<NodeId> {
        let xs = self.shape(x).to_vec();
        let last = *xs.last().ok_or(NumError::ShapeMismatch {
            context: "gather_last",
            detail: "rank 0".into(),
        })?;
        if xs.len() > 2 {
            return Err(NumError::ShapeMismatch {
                context: "gather_last",
                detail: format!("rank 1 or 2 required, got {xs:?}"),
            });
        }
        if let Some(&bad) = idx.iter().find(|&&i| i >= last) {
            return Err(NumError::ShapeMismatch {
                context: "gather_last",
                detail: format!("index {bad} out of range {last}"),
            });
        }
        let mut shape = xs;
        *shape.last_mut().unwrap() = idx.len();
        Ok(self.push(Expr::GatherLast { x, idx }, shape))
    }

    pub fn sum_all(&mut self, x: NodeId) -> NodeId {
        self.push(Expr::SumAll(x), vec![1])
    }

    pub fn detach(&mut self, x: NodeId) -> NodeId {
        let shape = self.shape(x).to_vec();
        self.push(Expr::Detach(x), shape)
    }

    pub fn output(&mut self, name: &str, id: NodeId) -> Result<()> {
        if self.outputs.iter().any(|(n, _)| n == name) {
            return Err(NumError::DuplicateName(name.to_string()));
        }
        self.outputs.push((name.to_string(), id));
        Ok(())
    }

    pub fn finish(self) -> Graph {
        let output_index = self.outputs.iter().map(|(n, id)| (n.clone(), *id)).collect();
        Graph {
            nodes: self.nodes,
            inputs: self.inputs,
            params: self.params,
            outputs: self.outputs,
            input_index: self.input_index,
            input_node: self.input_node,
            param_node: self.param_node,
            output_index,
        }
    }
}

// ---------------------------------------------------------------------------
// Kernels
// ---------------------------------------------------------------------------

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn unary_map(x: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    let mut out = Tensor::zeros(x.shape());
    for (o, v) in out.data_mut().iter_mut().zip(x.data().iter()) {
        *o = f(*v);
    }
    out
}

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    debug_assert_eq!(a.shape(), b.shape());
    let mut out = Tensor::zeros(a.shape());
    for ((o, x), y) in out.data_mut().iter_mut().zip(a.data().iter()).zip(b.data().iter()) {
        *o = f(*x, *y);
    }
    out
}

/// Apply f(x[c, l], v[c]) across a [C, L] tensor.
fn channel_map(x: &Tensor, v: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let (c, l) = (x.shape()[0], x.shape()[1]);
    let mut out = Tensor::zeros(x.shape());
    let xd = x.data();
    let vd = v.data();
    let od = out.data_mut();
    for ci in 0..c {
        let vc = vd[ci];
        for li in 0..l {
            od[ci * l + li] = f(xd[ci * l + li], vc);
        }
    }
    out
}

/// d(gain): sum over length of g ⊙ x per channel.
fn channel_reduce(g: &Tensor, x: &Tensor) -> Tensor {
    let (c, l) = (x.shape()[0], x.shape()[1]);
    let mut out = Tensor::zeros(&[c]);
    for ci in 0..c {
        let mut acc = 0.0;
        for li in 0..l {
            acc += g.data()[ci * l + li] * x.data()[ci * l + li];
        }
        out.data_mut()[ci] = acc;
    }
    out
}

fn channel_sum(g: &Tensor) -> Tensor {
    let (c, l) = (g.shape()[0], g.shape()[1]);
    let mut out = Tensor::zeros(&[c]);
    for ci in 0..c {
        out.data_mut()[ci] = g.data()[ci * l..(ci + 1) * l].iter().sum();
    }
    out
}

fn affine_forward(x: &Tensor, w: &Tensor, b: &Tensor) -> Tensor {
    let (k, m) = (w.shape()[0], w.shape()[1]);
    let batch = if x.rank() == 2 { x.shape()[0] } else { 1 };
    let out_shape: Vec<usize> = if x.rank() == 2 { vec![batch, m] } else { vec![m] };
    let mut out = Tensor::zeros(&out_shape);
    let od = out.data_mut();
    let xd = x.data();
    let wd = w.data();
    let bd = b.data();
    for i in 0..batch {
        let row = &mut od[i * m..(i + 1) * m];
        row.copy_from_slice(bd);
        for l in 0..k {
            let a = xd[i * k + l];
            if a == 0.0 {
                continue;
            }
            let wrow = &wd[l * m..(l + 1) * m];
            for (r, wv) in row.iter_mut().zip(wrow.iter()) {
                *r += a * wv;
            }
        }
    }
    out
}

fn affine_backward(x: &Tensor, w: &Tensor, g: &Tensor) -> (Tensor, Tensor, Tensor) {
    let (k, m) = (w.shape()[0], w.shape()[1]);
    let batch = if x.rank() == 2 { x.shape()[0] } else { 1 };
    let mut dx = Tensor::zeros(x.shape());
    let mut dw = Tensor::zeros(w.shape());
    let mut db = Tensor::zeros(&[m]);
    let xd = x.data();
    let wd = w.data();
    let gd = g.data();
    {
        let dxd = dx.data_mut();
        for i in 0..batch {
            let grow = &gd[i * m..(i + 1) * m];
            for l in 0..k {
                let wrow = &wd[l * m..(l + 1) * m];
                let mut acc = 0.0;
                for (gv, wv) in grow.iter().zip(wrow.iter()) {
                    acc += gv * wv;
                }
                dxd[i * k + l] = acc;
            }
        }
    }
    {
        let dwd = dw.data_mut();
        for i in 0..batch {
            let grow = &gd[i * m..(i + 1) * m];
            for l in 0..k {
                let a = xd[i * k + l];
                if a == 0.0 {
                    continue;
                }
                let drow = &mut dwd[l * m..(l + 1) * m];
                for (d, gv) in drow.iter_mut().zip(grow.iter()) {
                    *d += a * gv;
                }
            }
        }
    }
    {
        let dbd = db.data_mut();
        for i in 0..batch {
            for (d, gv) in dbd.iter_mut().zip(gd[i * m..(i + 1) * m].iter()) {
                *d += gv;
            }
        }
    }
    (dx, dw, db)
}

fn conv1d_forward(x: &Tensor, w: &Tensor, b: &Tensor, stride: usize, pad: usize) -> Tensor {
    let (c_in, l) = (x.shape()[0], x.shape()[1]);
    let (c_out, k) = (w.shape()[0], w.shape()[2]);
    let l_out = (l + 2 * pad - k) / stride + 1;
    let mut out = Tensor::zeros(&[c_out, l_out]);
    let xd = x.data();
    let wd = w.data();
    let od = out.data_mut();
    for co in 0..c_out {
        for j in 0..l_out {
            let mut acc = b.data()[co];
            for ci in 0..c_in {
                let wbase = (co * c_in + ci) * k;
                let xbase = ci * l;
                for t in 0..k {
                    let pos = (j * stride + t) as isize - pad as isize;
                    if pos >= 0 && (pos as usize) < l {
                        acc += wd[wbase + t] * xd[xbase + pos as usize];
                    }
                }
            }
            od[co * l_out + j] = acc;
        }
    }
    out
}

fn conv1d_backward(
    x: &Tensor,
    w: &Tensor,
    g: &Tensor,
    stride: usize,
    pad: usize,
) -> (Tensor, Tensor, Tensor) {
    let (c_in, l) = (x.shape()[0], x.shape()[1]);
    let (c_out, k) = (w.shape()[0], w.shape()[2]);
    let l_out = g.shape()[1];
    let mut dx = Tensor::zeros(x.shape());
    let mut dw = Tensor::zeros(w.shape());
    let mut db = Tensor::zeros(&[c_out]);
    let xd = x.data();
    let wd = w.data();
    let gd = g.data();
    for co in 0..c_out {
        let mut bacc = 0.0;
        for j in 0..l_out {
            let gv = gd[co * l_out + j];
            bacc += gv;
            if gv == 0.0 {
                continue;
            }
            for ci in 0..c_in {
                let wbase = (co * c_in + ci) * k;
                let xbase = ci * l;
                for t in 0..k {
                    let pos = (j * stride + t) as isize - pad as isize;
                    if pos >= 0 && (pos as usize) < l {
                        let p = pos as usize;
                        dx.data_mut()[xbase + p] += gv * wd[wbase + t];
                        dw.data_mut()[wbase + t] += gv * xd[xbase + p];
                    }
                }
            }
        }
        db.data_mut()[co] = bacc;
    }
    (dx, dw, db)
}

fn layer_norm_groups(shape: &[usize]) -> (usize, usize) {
    // (group size, group count): rank 1 normalizes the whole vector, rank 2
    // normalizes channels independently at each position.
    match shape {
        [n] => (*n, 1),
        [c, l] => (*c, *l),
        _ => unreachable!("layer_norm shapes validated at build"),
    }
}

fn layer_norm_forward(x: &Tensor, eps: f64) -> Tensor {
    let (c, groups) = layer_norm_groups(x.shape());
    let stride = groups; // group g reads x[i * stride + g] for rank-2 layout
    let mut out = Tensor::zeros(x.shape());
    let xd = x.data();
    let od = out.data_mut();
    for g in 0..groups {
        let mut mean = 0.0;
        for i in 0..c {
            mean += xd[i * stride + g];
        }
        mean /= c as f64;
        let mut var = 0.0;
        for i in 0..c {
            let d = xd[i * stride + g] - mean;
            var += d * d;
        }
        var /= c as f64;
        let inv = 1.0 / (var + eps).sqrt();
        for i in 0..c {
            od[i * stride + g] = (xd[i * stride + g] - mean) * inv;
        }
    }
    out
}

fn layer_norm_backward(x: &Tensor, g: &Tensor, eps: f64) -> Tensor {
    let (c, groups) = layer_norm_groups(x.shape());
    let stride = groups;
    let mut dx = Tensor::zeros(x.shape());
    let xd = x.data();
    let gd = g.data();
    let dxd = dx.data_mut();
    let n = c as f64;
    for gi in 0..groups {
        let mut mean = 0.0;
        for i in 0..c {
            mean += xd[i * stride + gi];
        }
        mean /= n;
        let mut var = 0.0;
        for i in 0..c {
            let d = xd[i * stride + gi] - mean;
            var += d * d;
        }
        var /= n;
        let inv = 1.0 / (var + eps).sqrt();
        let mut g_mean = 0.0;
        let mut gy_mean = 0.0;
        for i in 0..c {
            let y = (xd[i * stride + gi] - mean) * inv;
            g_mean += gd[i * stride + gi];
            gy_mean += gd[i * stride + gi] * y;
        }
        g_mean /= n;
        gy_mean /= n;
        for i in 0..c {
            let y = (xd[i * stride + gi] - mean) * inv;
            dxd[i * stride + gi] = inv * (gd[i * stride + gi] - g_mean - y * gy_mean);
        }
    }
    dx
}

fn max_pool_rows_argmax(x: &Tensor) -> Vec<usize> {
    let (n, f) = (x.shape()[0], x.shape()[1]);
    let xd = x.data();
    let mut arg = vec![0usize; f];
    for j in 0..f {
        let mut best = xd[j];
        let mut bi = 0usize;
        for i in 1..n {
            let v = xd[i * f + j];
            // Strict comparison: the lowest row index wins ties.
            if v > best {
                best = v;
                bi = i;
            }
        }
        arg[j] = bi;
    }
    arg
}

fn max_pool_rows_forward(x: &Tensor) -> Tensor {
    let f = x.shape()[1];
    let arg = max_pool_rows_argmax(x);
    let mut out = Tensor::zeros(&[f]);
    for j in 0..f {
        out.data_mut()[j] = x.data()[arg[j] * f + j];
    }
    out
}

fn max_pool_rows_backward(x: &Tensor, g: &Tensor) -> Tensor {
    let f = x.shape()[1];
    let arg = max_pool_rows_argmax(x);
    let mut dx = Tensor::zeros(x.shape());
    for j in 0..f {
        dx.data_mut()[arg[j] * f + j] = g.data()[j];
    }
    dx
}

fn concat_forward(parts: &[&Tensor]) -> Tensor {
    let mut shape = parts[0].shape().to_vec();
    shape[0] = parts.iter().map(|p| p.shape()[0]).sum();
    let mut out = Tensor::zeros(&shape);
    let mut offset = 0;
    for p in parts {
        out.data_mut()[offset..offset + p.len()].copy_from_slice(p.data());
        offset += p.len();
    }
    out
}

fn gather_last_forward(x: &Tensor, idx: &[usize]) -> Tensor {
    match x.shape() {
        [_] => {
            let mut out = Tensor::zeros(&[idx.len()]);
            for (o, &i) in out.data_mut().iter_mut().zip(idx.iter()) {
                *o = x.data()[i];
            }
            out
        }
        [c, l] => {
            let mut out = Tensor::zeros(&[*c, idx.len()]);
            let m = idx.len();
            for ci in 0..*c {
                for (j, &i) in idx.iter().enumerate() {
                    out.data_mut()[ci * m + j] = x.data()[ci * l + i];
                }
            }
            out
        }
        _ => unreachable!("gather_last shapes validated at build"),
    }
}

fn gather_last_backward(x_shape: &[usize], g: &Tensor, idx: &[usize]) -> Tensor {
    let mut dx = Tensor::zeros(x_shape);
    match x_shape {
        [_] => {
            for (j, &i) in idx.iter().enumerate() {
                dx.data_mut()[i] += g.data()[j];
            }
        }
        [c, l] => {
            let m = idx.len();
            for ci in 0..*c {
                for (j, &i) in idx.iter().enumerate() {
                    dx.data_mut()[ci * l + i] += g.data()[ci * m + j];
                }
            }
        }
        _ => unreachable!(),
    }
    dx
}
