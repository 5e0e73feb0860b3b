use std::fmt;
use std::str::FromStr;

use super::NetError;

/// One layer of the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    /// Valid (unpadded) convolution.
    Conv { filters: usize, kernel: usize, stride: usize },
    FullyConnected { outputs: usize },
    Relu,
    MaxPool { size: usize, stride: usize },
    /// Final normalization; must be last and see exactly two inputs.
    Softmax,
}

/// Tensor shape `(channels, height, width)`; fully-connected outputs are `(n, 1, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Shape {
    pub fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkSpec {
    pub input_size: usize,
    pub input_channels: usize,
    pub layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    /// Literal reading of the published architecture: 227x227x3 input, five
    /// convolutions (96@11/4, 256@5/1, then 9@3/1 three times), three
    /// fully-connected layers, two-way softmax.
    pub fn afif4_paper() -> Self {
        use LayerSpec::*;
        Self {
            input_size: 227,
            input_channels: 3,
            layers: vec![
                Conv { filters: 96, kernel: 11, stride: 4 },
                Relu,
                Conv { filters: 256, kernel: 5, stride: 1 },
                Relu,
                Conv { filters: 9, kernel: 3, stride: 1 },
                Relu,
                Conv { filters: 9, kernel: 3, stride: 1 },
                Relu,
                Conv { filters: 9, kernel: 3, stride: 1 },
                Relu,
                FullyConnected { outputs: 4096 },
                Relu,
                FullyConnected { outputs: 4096 },
                Relu,
                FullyConnected { outputs: 2 },
                Softmax,
            ],
        }
    }

    /// Same depth with the reference model's widths (384, 384, 256) for the
    /// last three convolutions and max-pooling after conv1, conv2 and conv5.
    pub fn afif4_paper_wide() -> Self {
        use LayerSpec::*;
        Self {
            input_size: 227,
            input_channels: 3,
            layers: vec![
                Conv { filters: 96, kernel: 11, stride: 4 },
                Relu,
                MaxPool { size: 3, stride: 2 },
                Conv { filters: 256, kernel: 5, stride: 1 },
                Relu,
                MaxPool { size: 3, stride: 2 },
                Conv { filters: 384, kernel: 3, stride: 1 },
                Relu,
                Conv { filters: 384, kernel: 3, stride: 1 },
                Relu,
                Conv { filters: 256, kernel: 3, stride: 1 },
                Relu,
                MaxPool { size: 3, stride: 2 },
                FullyConnected { outputs: 4096 },
                Relu,
                FullyConnected { outputs: 4096 },
                Relu,
                FullyConnected { outputs: 2 },
                Softmax,
            ],
        }
    }

    /// Desk-scale network: 32x32x3, conv 8@5/2, conv 16@3/1, fc 32, fc 2.
    pub fn afif4_tiny() -> Self {
        Self::tiny_topology(32, 3)
    }

    /// The tiny topology on an arbitrary square input.
    pub fn tiny_topology(input_size: usize, input_channels: usize) -> Self {
        use LayerSpec::*;
        Self {
            input_size,
            input_channels,
            layers: vec![
                Conv { filters: 8, kernel: 5, stride: 2 },
                Relu,
                Conv { filters: 16, kernel: 3, stride: 1 },
                Relu,
                FullyConnected { outputs: 32 },
                Relu,
                FullyConnected { outputs: 2 },
                Softmax,
            ],
        }
    }

    pub fn preset(name: &str) -> Result<Self, NetError> {
        match name {
            "afif4-paper" => Ok(Self::afif4_paper()),
            "afif4-paper-wide" => Ok(Self::afif4_paper_wide()),
            "afif4-tiny" => Ok(Self::afif4_tiny()),
            other => Err(NetError::Spec(format!("unknown preset {other:?}"))),
        }
    }

    pub fn input_shape(&self) -> Shape {
        Shape { channels: self.input_channels, height: self.input_size, width: self.input_size }
    }

    /// Output shape of every layer, validating the chain.
    pub fn shapes(&self) -> Result<Vec<Shape>, NetError> {
        if self.input_size == 0 || self.input_channels == 0 {
            return Err(NetError::Spec("input size and channels must be positive".into()));
        }
        let mut cur = self.input_shape();
        let mut out = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let bad = |msg: String| NetError::Spec(format!("layer {i}: {msg}"));
            cur = match *layer {
                LayerSpec::Conv { filters, kernel, stride } => {
                    if filters == 0 || kernel == 0 || stride == 0 {
                        return Err(bad("filters, kernel and stride must be at least 1".into()));
                    }
                    if kernel > cur.height || kernel > cur.width {
                        return Err(bad(format!("kernel {kernel} exceeds input {}x{}", cur.height, cur.width)));
                    }
                    Shape {
                        channels: filters,
                        height: (cur.height - kernel) / stride + 1,
                        width: (cur.width - kernel) / stride + 1,
                    }
                }
                LayerSpec::MaxPool { size, stride } => {
                    if size == 0 || stride == 0 {
                        return Err(bad("pool size and stride must be at least 1".into()));
                    }
                    if size > cur.height || size > cur.width {
                        return Err(bad("pool window exceeds input".into()));
                    }
                    Shape {
                        channels: cur.channels,
                        height: (cur.height - size) / stride + 1,
                        width: (cur.width - size) / stride + 1,
                    }
                }
                LayerSpec::FullyConnected { outputs } => {
                    if outputs == 0 {
                        return Err(bad("outputs must be at least 1".into()));
                    }
                    Shape { channels: outputs, height: 1, width: 1 }
                }
                LayerSpec::Relu => cur,
                LayerSpec::Softmax => {
                    if i + 1 != self.layers.len() {
                        return Err(bad("softmax must be the last layer".into()));
                    }
                    cur
                }
            };
            out.push(cur);
        }
        match (self.layers.last(), out.last()) {
            (Some(LayerSpec::Softmax), Some(s)) if s.len() == 2 => Ok(out),
            _ => Err(NetError::Spec("network must end in a two-way softmax".into())),
        }
    }

    /// Trainable parameter count (weights and biases).
    pub fn parameter_count(&self) -> Result<usize, NetError> {
        let shapes = self.shapes()?;
        let mut prev = self.input_shape();
        let mut total = 0;
        for (layer, shape) in self.layers.iter().zip(&shapes) {
            total += match *layer {
                LayerSpec::Conv { filters, kernel, .. } => filters * (prev.channels * kernel * kernel + 1),
                LayerSpec::FullyConnected { outputs } => outputs * (prev.len() + 1),
                _ => 0,
            };
            prev = *shape;
        }
        Ok(total)
    }
}

/// Compact text form, e.g. `in=32x32x3 conv=8x5s2 relu fc=2 softmax`.
impl fmt::Display for NetworkSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "in={}x{}x{}", self.input_size, self.input_size, self.input_channels)?;
        for layer in &self.layers {
            match layer {
                LayerSpec::Conv { filters, kernel, stride } => write!(f, " conv={filters}x{kernel}s{stride}")?,
                LayerSpec::FullyConnected { outputs } => write!(f, " fc={outputs}")?,
                LayerSpec::Relu => write!(f, " relu")?,
                LayerSpec::MaxPool { size, stride } => write!(f, " pool={size}s{stride}")?,
                LayerSpec::Softmax => write!(f, " softmax")?,
            }
        }
        Ok(())
    }
}

impl FromStr for NetworkSpec {
    type Err = NetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |tok: &str| NetError::Spec(format!("cannot parse {tok:?}"));
        let num = |v: &str, tok: &str| v.parse::<usize>().map_err(|_| bad(tok));
        let mut tokens = s.split_whitespace();
        let first = tokens.next().ok_or_else(|| bad(s))?;
        let dims = first.strip_prefix("in=").ok_or_else(|| bad(first))?;
        let parts: Vec<&str> = dims.split('x').collect();
        if parts.len() != 3 || parts[0] != parts[1] {
            return Err(bad(first));
        }
        let (input_size, input_channels) = (num(parts[0], first)?, num(parts[2], first)?);
        let mut layers = Vec::new();
        for tok in tokens {
            let layer = if tok == "relu" {
                LayerSpec::Relu
            } else if tok == "softmax" {
                LayerSpec::Softmax
            } else if let Some(v) = tok.strip_prefix("fc=") {
                LayerSpec::FullyConnected { outputs: num(v, tok)? }
            } else if let Some(v) = tok.strip_prefix("conv=") {
                let (filters, rest) = v.split_once('x').ok_or_else(|| bad(tok))?;
                let (kernel, stride) = rest.split_once('s').ok_or_else(|| bad(tok))?;
                LayerSpec::Conv { filters: num(filters, tok)?, kernel: num(kernel, tok)?, stride: num(stride, tok)? }
            } else if let Some(v) = tok.strip_prefix("pool=") {
                let (size, stride) = v.split_once('s').ok_or_else(|| bad(tok))?;
                LayerSpec::MaxPool { size: num(size, tok)?, stride: num(stride, tok)? }
            } else {
                return Err(bad(tok));
            };
            layers.push(layer);
        }
        let spec = NetworkSpec { input_size, input_channels, layers };
        spec.shapes()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_preset_chain() {
        let spec = NetworkSpec::afif4_paper();
        let shapes = spec.shapes().unwrap();
        assert_eq!(shapes[0], Shape { channels: 96, height: 55, width: 55 });
        assert_eq!(shapes[2], Shape { channels: 256, height: 51, width: 51 });
        assert_eq!(shapes[8], Shape { channels: 9, height: 45, width: 45 });
        assert_eq!(shapes.last().unwrap().len(), 2);
        let convs = spec.layers.iter().filter(|l| matches!(l, LayerSpec::Conv { .. })).count();
        let fcs = spec.layers.iter().filter(|l| matches!(l, LayerSpec::FullyConnected { .. })).count();
        assert_eq!((convs, fcs), (5, 3));
    }

    #[test]
    fn wide_preset_chain() {
        let shapes = NetworkSpec::afif4_paper_wide().shapes().unwrap();
        assert_eq!(shapes[2], Shape { channels: 96, height: 27, width: 27 });
        assert_eq!(shapes.last().unwrap().len(), 2);
    }

    #[test]
    fn tiny_preset_chain() {
        let spec = NetworkSpec::afif4_tiny();
        let shapes = spec.shapes().unwrap();
        assert_eq!(shapes[0], Shape { channels: 8, height: 14, width: 14 });
        assert_eq!(shapes[2], Shape { channels: 16, height: 12, width: 12 });
        assert_eq!(spec.parameter_count().unwrap(), 8 * 76 + 16 * 73 + 32 * 2305 + 2 * 33);
    }

    #[test]
    fn text_round_trip() {
        for spec in [NetworkSpec::afif4_paper(), NetworkSpec::afif4_paper_wide(), NetworkSpec::afif4_tiny()] {
            assert_eq!(spec.to_string().parse::<NetworkSpec>().unwrap(), spec);
        }
    }

    #[test]
    fn invalid_chains() {
        let mut spec = NetworkSpec::afif4_tiny();
        spec.layers.pop();
        assert!(spec.shapes().is_err());
        let spec: Result<NetworkSpec, _> = "in=4x4x1 conv=2x5s1 fc=2 softmax".parse();
        assert!(spec.is_err());
        let spec: Result<NetworkSpec, _> = "in=4x4x1 fc=3 softmax".parse();
        assert!(spec.is_err());
        assert!(NetworkSpec::preset("nope").is_err());
    }
}
