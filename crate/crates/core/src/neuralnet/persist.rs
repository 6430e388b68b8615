//! Text model format.
//!
//! ```text
//! motorfault-model 1
//! config
//! input_dim 6
//! hidden_layers 10            (comma-separated widths, `-` when none)
//! output_dim 7
//! learning_rate 0.1
//! max_epochs 2000
//! target_loss 0.001
//! seed 1
//! shuffle_each_epoch true
//! normalize_inputs false
//! scaler                      (optional block)
//! min <in_dim numbers>
//! max <in_dim numbers>
//! layer <in_dim> <out_dim>    (one block per layer, input side first)
//! w <in_dim numbers>          (out_dim rows, row-major)
//! b <out_dim numbers>
//! end
//! ```
//!
//! Tokens are separated by single spaces. Numbers are written as shortest
//! round-trip decimals so a load reproduces every weight bit for bit. Every
//! config key is optional on load (defaults come from
//! [`NetworkConfig::motor`]); dimensions given there must agree with the
//! layers. The trailing `end` line makes truncation detectable.

use std::fmt::Write as _;

use crate::dataset::MinMaxScaler;
use crate::error::{Error, Result};

use super::{Layer, Network, NetworkConfig};

pub const MODEL_MAGIC: &str = "motorfault-model";
pub const MODEL_VERSION: u32 = 1;

const SOURCE: &str = "model";

pub fn save_model(net: &Network) -> Vec<u8> {
    let cfg = net.config();
    let mut out = String::new();
    writeln!(out, "{MODEL_MAGIC} {MODEL_VERSION}").unwrap();
    out.push_str("config\n");
    writeln!(out, "input_dim {}", net.input_dim()).unwrap();
    let hidden: Vec<String> = net.layers()[..net.layers().len() - 1]
        .iter()
        .map(|l| l.out_dim().to_string())
        .collect();
    let hidden = if hidden.is_empty() { "-".to_owned() } else { hidden.join(",") };
    writeln!(out, "hidden_layers {hidden}").unwrap();
    writeln!(out, "output_dim {}", net.output_dim()).unwrap();
    writeln!(out, "learning_rate {}", cfg.learning_rate).unwrap();
    writeln!(out, "max_epochs {}", cfg.max_epochs).unwrap();
    writeln!(out, "target_loss {}", cfg.target_loss).unwrap();
    writeln!(out, "seed {}", cfg.seed).unwrap();
    writeln!(out, "shuffle_each_epoch {}", cfg.shuffle_each_epoch).unwrap();
    writeln!(out, "normalize_inputs {}", cfg.normalize_inputs).unwrap();
    if let Some(scaler) = net.scaler() {
        out.push_str("scaler\n");
        write_row(&mut out, "min", &scaler.min);
        write_row(&mut out, "max", &scaler.max);
    }
    for layer in net.layers() {
        writeln!(out, "layer {} {}", layer.in_dim(), layer.out_dim()).unwrap();
        for row in layer.weights().chunks(layer.in_dim()) {
            write_row(&mut out, "w", row);
        }
        write_row(&mut out, "b", layer.biases());
    }
    out.push_str("end\n");
    out.into_bytes()
}

fn write_row(out: &mut String, tag: &str, values: &[f64]) {
    out.push_str(tag);
    for v in values {
        write!(out, " {v}").unwrap();
    }
    out.push('\n');
}

struct Cursor<'a> {
    lines: Vec<&'a str>,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<&'a str> {
        self.lines.get(self.pos).copied()
    }

    /// 1-based number of the line `peek` would return.
    fn line_no(&self) -> usize {
        self.pos + 1
    }

    fn next(&mut self) -> Result<(usize, &'a str)> {
        let line = self
            .peek()
            .ok_or_else(|| Error::parse(SOURCE, self.line_no(), "unexpected end of model file"))?;
        self.pos += 1;
        Ok((self.pos, line))
    }

    /// Next line, which must start with `tag`; returns the remaining tokens.
    fn tagged(&mut self, tag: &str) -> Result<(usize, Vec<&'a str>)> {
        let (line_no, line) = self.next()?;
        let mut tokens = line.split(' ');
        match tokens.next() {
            Some(t) if t == tag => Ok((line_no, tokens.collect())),
            _ => Err(Error::parse(SOURCE, line_no, format!("expected `{tag}` line, found `{line}`"))),
        }
    }

    /// A `tag v1 v2 ...` row, optionally of a fixed length.
    fn numbers(&mut self, tag: &str, expected: Option<usize>) -> Result<Vec<f64>> {
        let (line_no, tokens) = self.tagged(tag)?;
        if let Some(expected) = expected.filter(|&n| n != tokens.len()) {
            return Err(Error::parse(
                SOURCE,
                line_no,
                format!("`{tag}` expects {expected} values, found {}", tokens.len()),
            ));
        }
        tokens
            .iter()
            .map(|t| {
                t.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::parse(SOURCE, line_no, format!("`{t}` is not a finite number")))
            })
            .collect()
    }
}

fn parse_value<T: std::str::FromStr>(line_no: usize, key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::parse(SOURCE, line_no, format!("invalid value `{value}` for `{key}`")))
}

pub fn load_model(bytes: &[u8]) -> Result<Network> {
    let text = std::str::from_utf8(bytes).map_err(|e| {
        let line = bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count() + 1;
        Error::parse(SOURCE, line, "model file is not valid UTF-8")
    })?;
    let mut cur = Cursor {
        lines: text.lines().collect(),
        pos: 0,
    };

    let (line_no, header) = cur.tagged(MODEL_MAGIC)?;
    match header.as_slice() {
        [v] if v.parse::<u32>() == Ok(MODEL_VERSION) => {}
        _ => {
            return Err(Error::parse(
                SOURCE,
                line_no,
                format!("unsupported model schema version `{}`", header.join(" ")),
            ))
        }
    }

    cur.tagged("config")?;
    let mut config = NetworkConfig::motor();
    let mut declared_input = None;
    let mut declared_output = None;
    let mut declared_hidden = None;
    let mut seen = Vec::new();
    while let Some(line) = cur.peek() {
        let (key, value) = match line.split_once(' ') {
            Some((k, v)) if !matches!(k, "scaler" | "layer") => (k, v),
            _ => break,
        };
        let (line_no, _) = cur.next()?;
        if seen.contains(&key) {
            return Err(Error::parse(SOURCE, line_no, format!("duplicate key `{key}`")));
        }
        seen.push(key);
        match key {
            "input_dim" => declared_input = Some((line_no, parse_value::<usize>(line_no, key, value)?)),
            "output_dim" => declared_output = Some((line_no, parse_value::<usize>(line_no, key, value)?)),
            "hidden_layers" => {
                let widths = if value == "-" {
                    Vec::new()
                } else {
                    value
                        .split(',')
                        .map(|w| parse_value::<usize>(line_no, key, w))
                        .collect::<Result<Vec<_>>>()?
                };
                declared_hidden = Some((line_no, widths));
            }
            "learning_rate" => config.learning_rate = parse_value(line_no, key, value)?,
            "max_epochs" => config.max_epochs = parse_value(line_no, key, value)?,
            "target_loss" => config.target_loss = parse_value(line_no, key, value)?,
            "seed" => config.seed = parse_value(line_no, key, value)?,
            "shuffle_each_epoch" => config.shuffle_each_epoch = parse_value(line_no, key, value)?,
            "normalize_inputs" => config.normalize_inputs = parse_value(line_no, key, value)?,
            _ => return Err(Error::parse(SOURCE, line_no, format!("unknown config key `{key}`"))),
        }
    }

    let scaler_line = cur.line_no();
    let mut scaler = None;
    if cur.peek() == Some("scaler") {
        cur.next()?;
        let min = cur.numbers("min", None)?;
        let max = cur.numbers("max", Some(min.len()))?;
        scaler = Some(MinMaxScaler { min, max });
    }

    let mut layers = Vec::new();
    while cur.peek().is_some_and(|l| l.starts_with("layer")) {
        let (line_no, dims) = cur.tagged("layer")?;
        let [in_dim, out_dim] = dims.as_slice() else {
            return Err(Error::parse(SOURCE, line_no, "`layer` expects `<in_dim> <out_dim>`"));
        };
        let in_dim: usize = parse_value(line_no, "layer", in_dim)?;
        let out_dim: usize = parse_value(line_no, "layer", out_dim)?;
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::parse(SOURCE, line_no, "layer dimensions must be at least 1"));
        }
        if let Some(prev) = layers.last().map(Layer::out_dim) {
            if prev != in_dim {
                return Err(Error::parse(
                    SOURCE,
                    line_no,
                    format!("layer input width {in_dim} does not match previous output width {prev}"),
                ));
            }
        }
        let mut weights = Vec::with_capacity(in_dim * out_dim);
        for _ in 0..out_dim {
            weights.extend(cur.numbers("w", Some(in_dim))?);
        }
        let biases = cur.numbers("b", Some(out_dim))?;
        layers.push(Layer::new(in_dim, out_dim, weights, biases).map_err(|e| Error::parse(SOURCE, line_no, e.to_string()))?);
    }

    let end_line = cur.line_no();
    match cur.next() {
        Ok((_, "end")) => {}
        Ok((line_no, line)) => {
            return Err(Error::parse(SOURCE, line_no, format!("expected `layer` or `end`, found `{line}`")))
        }
        Err(_) => return Err(Error::parse(SOURCE, end_line, "missing `end` line (truncated model file?)")),
    }
    if layers.is_empty() {
        return Err(Error::parse(SOURCE, end_line, "model has no layers"));
    }
    if let Some((line_no, line)) = cur.lines[cur.pos..]
        .iter()
        .enumerate()
        .find(|(_, l)| !l.is_empty())
    {
        return Err(Error::parse(SOURCE, cur.pos + line_no + 1, format!("trailing content `{line}`")));
    }

    let mut net = Network::from_layers(config, layers).map_err(|e| Error::parse(SOURCE, end_line, e.to_string()))?;
    if let Some((line_no, _)) = declared_input.filter(|&(_, d)| d != net.input_dim()) {
        return Err(Error::parse(SOURCE, line_no, "input_dim does not match the first layer"));
    }
    if let Some((line_no, _)) = declared_output.filter(|&(_, d)| d != net.output_dim()) {
        return Err(Error::parse(SOURCE, line_no, "output_dim does not match the last layer"));
    }
    if let Some((line_no, widths)) = declared_hidden {
        if widths != net.config().hidden_layers {
            return Err(Error::parse(SOURCE, line_no, "hidden_layers does not match the layer blocks"));
        }
    }
    if scaler.is_some() {
        net.set_scaler(scaler)
            .map_err(|e| Error::parse(SOURCE, scaler_line, e.to_string()))?;
    }
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuralnet::sigmoid;
    use crate::rng::SeededRng;

    fn sample_net(seed: u64) -> Network {
        Network::init(&NetworkConfig::motor().with_hidden(vec![5, 4]).with_seed(seed)).unwrap()
    }

    #[test]
    fn round_trip_preserves_outputs_bitwise() {
        let net = sample_net(17);
        let loaded = load_model(&save_model(&net)).unwrap();
        let mut rng = SeededRng::new(1);
        for _ in 0..100 {
            let x: Vec<f64> = (0..6).map(|_| rng.uniform(0.0, 3.0)).collect();
            let a = net.predict(&x).unwrap();
            let b = loaded.predict(&x).unwrap();
            assert_eq!(
                a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
            );
        }
        assert_eq!(loaded.config(), net.config());
        assert_eq!(save_model(&loaded), save_model(&net));
    }

    #[test]
    fn round_trip_with_scaler() {
        let mut net = sample_net(2);
        net.set_scaler(Some(MinMaxScaler {
            min: vec![0.1; 6],
            max: vec![2.9; 6],
        }))
        .unwrap();
        let loaded = load_model(&save_model(&net)).unwrap();
        assert_eq!(loaded.scaler(), net.scaler());
    }

    #[test]
    fn minimal_hand_written_model() {
        let text = "motorfault-model 1\nconfig\nlayer 1 1\nw 2\nb 0\nend\n";
        let net = load_model(text.as_bytes()).unwrap();
        let out = net.predict(&[1.0]).unwrap();
        assert_eq!(out, vec![sigmoid(2.0)]);
        assert!((out[0] - 0.880_797_077_977_882_3).abs() < 1e-15);
    }

    #[test]
    fn every_truncation_is_an_error() {
        let bytes = save_model(&sample_net(3));
        // cutting at any byte boundary short of the final newline of `end`
        for cut in 0..bytes.len() - 1 {
            let result = load_model(&bytes[..cut]);
            assert!(
                matches!(result, Err(Error::Parse { .. })),
                "cut at {cut} gave {result:?}"
            );
        }
    }

    fn parse_error_line(text: &str) -> usize {
        match load_model(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => line,
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_models_report_location() {
        assert_eq!(parse_error_line("motorfault-model 2\nconfig\nlayer 1 1\nw 2\nb 0\nend\n"), 1);
        assert_eq!(parse_error_line("something-else 1\n"), 1);
        assert_eq!(parse_error_line("motorfault-model 1\nconfig\nbogus 3\nlayer 1 1\nw 2\nb 0\nend\n"), 3);
        assert_eq!(parse_error_line("motorfault-model 1\nconfig\nlayer 1 1\nw 2 3\nb 0\nend\n"), 4);
        assert_eq!(parse_error_line("motorfault-model 1\nconfig\nlayer 1 1\nw x\nb 0\nend\n"), 4);
        assert_eq!(parse_error_line("motorfault-model 1\nconfig\nlayer 1 2\nw 1\nw 1\nb 0 0\nlayer 3 1\nw 1 1 1\nb 0\nend\n"), 7);
        assert_eq!(parse_error_line("motorfault-model 1\nconfig\ninput_dim 2\nlayer 1 1\nw 2\nb 0\nend\n"), 3);
        assert_eq!(parse_error_line("motorfault-model 1\nconfig\nlayer 1 1\nw 2\nb 0\nend\nextra\n"), 7);
        assert_eq!(parse_error_line("motorfault-model 1\nconfig\nend\n"), 3);
    }

    #[test]
    fn invalid_utf8_is_parse_error() {
        let bytes = b"motorfault-model 1\nconfig\n\xff\xfe\n";
        assert!(matches!(load_model(bytes), Err(Error::Parse { line: 3, .. })));
    }
}
