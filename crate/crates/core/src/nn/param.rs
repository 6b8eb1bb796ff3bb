use rand::Rng;

/// Weight-decay group every parameter belongs to unless a builder says
/// otherwise.
pub const DEFAULT_GROUP: &str = "default";

/// A parameter array with its gradient.
///
/// `learnable == false` marks frozen weights (random-constant pointwise
/// layers): the optimizer never touches them and backward passes leave their
/// gradient at zero.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
    pub grad: Vec<f64>,
    pub learnable: bool,
    pub weight_decay_group: String,
}

impl ParamTensor {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, values: Vec<f64>, learnable: bool) -> Self {
        let len: usize = shape.iter().product();
        assert_eq!(len, values.len(), "param values do not match shape {shape:?}");
        Self {
            name: name.into(),
            shape,
            grad: vec![0.0; len],
            values,
            learnable,
            weight_decay_group: DEFAULT_GROUP.to_string(),
        }
    }

    pub fn filled(name: impl Into<String>, shape: Vec<usize>, v: f64) -> Self {
        let len = shape.iter().product();
        Self::new(name, shape, vec![v; len], true)
    }

    /// i.i.d. `U(-bound, bound)` values.
    pub fn uniform(
        name: impl Into<String>,
        shape: Vec<usize>,
        bound: f64,
        rng: &mut impl Rng,
        learnable: bool,
    ) -> Self {
        let len: usize = shape.iter().product();
        let values = (0..len).map(|_| rng.gen_range(-bound..=bound)).collect();
        Self::new(name, shape, values, learnable)
    }

    pub fn with_group(mut self, group: impl Into<String>) -> Self {
        self.weight_decay_group = group.into();
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Non-parameter state that still belongs in a checkpoint (batch-norm
/// running statistics).
#[derive(Clone, Debug, PartialEq)]
pub struct Buffer {
    pub name: String,
    pub values: Vec<f64>,
}
