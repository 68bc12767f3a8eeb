//! External potentials `V` on `R^n`: a small catalog with analytic
//! derivatives, and user expressions over `x1..xn`.

use std::fmt;

use nalgebra::DMatrix;

use crate::error::{invalid, HartreeError, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Potential {
    /// `V = mu`.
    Constant(f64),
    /// `V = g . x`.
    Linear(Vec<f64>),
    /// `V = c |x|^2`.
    Quadratic { c: f64 },
    /// `V = a ((x1/s)^2 - 1)^2 + c (x2^2 + ... + xn^2)`: minima at
    /// `x1 = +-s`, a saddle at the origin.
    DoubleWell { a: f64, s: f64, c: f64 },
    /// `V = a ((x1^2 + x2^2)/rho^2 - 1)^2 + c (x3^2 + ... + xn^2)`: a circle of
    /// minima of radius `rho` in the `(x1, x2)` plane.
    Ring { a: f64, rho: f64, c: f64 },
    Expression(Expr),
}

/// A potential together with the dimension it acts in.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialField {
    pub dim: usize,
    pub potential: Potential,
}

impl fmt::Display for PotentialField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.potential {
            Potential::Constant(mu) => write!(f, "constant:{mu}"),
            Potential::Linear(g) => {
                let parts: Vec<String> = g.iter().map(|x| x.to_string()).collect();
                write!(f, "linear:{}", parts.join(","))
            }
            Potential::Quadratic { c } => write!(f, "quadratic:{c}"),
            Potential::DoubleWell { a, s, c } => write!(f, "double_well:{a},{s},{c}"),
            Potential::Ring { a, rho, c } => write!(f, "ring:{a},{rho},{c}"),
            Potential::Expression(e) => write!(f, "expr:{}", e.source),
        }
    }
}

fn step(x: f64) -> f64 {
    1e-5 * (1.0 + x.abs())
}

impl PotentialField {
    pub fn new(dim: usize, potential: Potential) -> Result<Self> {
        crate::radial::check_dim(dim)?;
        match &potential {
            Potential::Constant(mu) if !mu.is_finite() => return invalid("constant potential must be finite"),
            Potential::Linear(g) if g.len() != dim => {
                return invalid(format!("linear potential needs {dim} coefficients, got {}", g.len()))
            }
            Potential::DoubleWell { s, .. } if !(*s > 0.0) => return invalid("double_well width must be positive"),
            Potential::Ring { rho, .. } if !(*rho > 0.0) => return invalid("ring radius must be positive"),
            Potential::Expression(e) if e.max_var > dim => {
                return invalid(format!("expression uses x{} in dimension {dim}", e.max_var))
            }
            _ => {}
        }
        Ok(PotentialField { dim, potential })
    }

    /// Catalog entry by name with its parameter list; missing trailing
    /// parameters take the value 1.
    pub fn catalog(dim: usize, name: &str, params: &[f64]) -> Result<Self> {
        let p = |i: usize| params.get(i).copied().unwrap_or(1.0);
        let max = |m: usize| {
            if params.len() > m {
                invalid(format!("potential '{name}' takes at most {m} parameters, got {}", params.len()))
            } else {
                Ok(())
            }
        };
        let potential = match name {
            "constant" => {
                max(1)?;
                Potential::Constant(params.first().copied().unwrap_or(0.0))
            }
            "linear" => Potential::Linear(params.to_vec()),
            "quadratic" => {
                max(1)?;
                Potential::Quadratic { c: p(0) }
            }
            "double_well" => {
                max(3)?;
                Potential::DoubleWell { a: p(0), s: p(1), c: p(2) }
            }
            "ring" => {
                max(3)?;
                Potential::Ring { a: p(0), rho: p(1), c: p(2) }
            }
            other => return Err(HartreeError::Parse(format!("unknown potential '{other}'"))),
        };
        Self::new(dim, potential)
    }

    /// `name`, `name:p1,p2,...` or `expr:<expression>`.
    pub fn parse(dim: usize, spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let (name, rest) = match spec.split_once(':') {
            Some((a, b)) => (a.trim(), Some(b)),
            None => (spec, None),
        };
        if name == "expr" {
            let src = rest.ok_or_else(|| HartreeError::Parse("expr: needs an expression".into()))?;
            return Self::new(dim, Potential::Expression(Expr::parse(src)?));
        }
        let params = match rest {
            None => Vec::new(),
            Some(r) if r.trim().is_empty() => Vec::new(),
            Some(r) => r
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|_| HartreeError::Parse(format!("bad potential parameter '{}'", t.trim())))
                })
                .collect::<Result<_>>()?,
        };
        Self::catalog(dim, name, &params)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let tail = |from: usize| x[from..].iter().map(|v| v * v).sum::<f64>();
        match &self.potential {
            Potential::Constant(mu) => *mu,
            Potential::Linear(g) => g.iter().zip(x).map(|(a, b)| a * b).sum(),
            Potential::Quadratic { c } => c * tail(0),
            Potential::DoubleWell { a, s, c } => {
                let q = (x[0] / s).powi(2) - 1.0;
                a * q * q + c * tail(1)
            }
            Potential::Ring { a, rho, c } => {
                let q = (x[0] * x[0] + x[1] * x[1]) / (rho * rho) - 1.0;
                a * q * q + c * tail(2)
            }
            Potential::Expression(e) => e.eval(x),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let mut g = vec![0.0; n];
        match &self.potential {
            Potential::Constant(_) => {}
            Potential::Linear(c) => g.copy_from_slice(c),
            Potential::Quadratic { c } => {
                for i in 0..n {
                    g[i] = 2.0 * c * x[i];
                }
            }
            Potential::DoubleWell { a, s, c } => {
                let q = (x[0] / s).powi(2) - 1.0;
                g[0] = 4.0 * a * q * x[0] / (s * s);
                for i in 1..n {
                    g[i] = 2.0 * c * x[i];
                }
            }
            Potential::Ring { a, rho, c } => {
                let r2 = rho * rho;
                let q = (x[0] * x[0] + x[1] * x[1]) / r2 - 1.0;
                g[0] = 4.0 * a * q * x[0] / r2;
                g[1] = 4.0 * a * q * x[1] / r2;
                for i in 2..n {
                    g[i] = 2.0 * c * x[i];
                }
            }
            Potential::Expression(_) => {
                let mut y = x.to_vec();
                for i in 0..n {
                    let h = step(x[i]);
                    y[i] = x[i] + h;
                    let up = self.value(&y);
                    y[i] = x[i] - h;
                    let down = self.value(&y);
                    y[i] = x[i];
                    g[i] = (up - down) / (2.0 * h);
                }
            }
        }
        g
    }

    pub fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.dim;
        let mut h = DMatrix::zeros(n, n);
        match &self.potential {
            Potential::Constant(_) | Potential::Linear(_) => {}
            Potential::Quadratic { c } => {
                for i in 0..n {
                    h[(i, i)] = 2.0 * c;
                }
            }
            Potential::DoubleWell { a, s, c } => {
                let s2 = s * s;
                h[(0, 0)] = 4.0 * a * (3.0 * x[0] * x[0] / s2 - 1.0) / s2;
                for i in 1..n {
                    h[(i, i)] = 2.0 * c;
                }
            }
            Potential::Ring { a, rho, c } => {
                let r2 = rho * rho;
                let q = (x[0] * x[0] + x[1] * x[1]) / r2 - 1.0;
                for i in 0..2 {
                    for j in 0..2 {
                        let delta = if i == j { q } else { 0.0 };
                        h[(i, j)] = 4.0 * a * (delta + 2.0 * x[i] * x[j] / r2) / r2;
                    }
                }
                for i in 2..n {
                    h[(i, i)] = 2.0 * c;
                }
            }
            Potential::Expression(_) => {
                let mut y = x.to_vec();
                for j in 0..n {
                    let s = step(x[j]);
                    y[j] = x[j] + s;
                    let up = self.gradient(&y);
                    y[j] = x[j] - s;
                    let down = self.gradient(&y);
                    y[j] = x[j];
                    for i in 0..n {
                        h[(i, j)] = (up[i] - down[i]) / (2.0 * s);
                    }
                }
                h = (&h + h.transpose()) * 0.5;
            }
        }
        h
    }

    /// Smallest `1 + V` over the lattice of `per_axis^n` points of `bx`;
    /// errors if it is not positive or any sample is not finite.
    pub fn lower_bound_check(&self, bx: &SampleBox, per_axis: usize) -> Result<f64> {
        if bx.dim() != self.dim {
            return invalid(format!("box dimension {} does not match potential dimension {}", bx.dim(), self.dim));
        }
        let mut lo = f64::INFINITY;
        for x in bx.lattice(per_axis, false) {
            let v = 1.0 + self.value(&x);
            if !v.is_finite() || self.gradient(&x).iter().any(|g| !g.is_finite()) {
                return Err(HartreeError::NonFinite(format!("potential at {x:?}")));
            }
            lo = lo.min(v);
        }
        if !(lo > 0.0) {
            return invalid(format!("inf of 1 + V over the box is {lo}, must be positive"));
        }
        Ok(lo)
    }
}

/// Axis-aligned box `[lower, upper]` in `R^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl SampleBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return invalid("box corners must have the same nonzero length");
        }
        if lower.iter().zip(&upper).any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite()) {
            return invalid("box needs finite lower < upper in every coordinate");
        }
        Ok(SampleBox { lower, upper })
    }

    /// `[-half, half]^n`.
    pub fn cube(dim: usize, half: f64) -> Result<Self> {
        Self::new(vec![-half; dim], vec![half; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, x: &[f64], slack: f64) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (a, b))| *v >= a - slack * (b - a) && *v <= b + slack * (b - a))
    }

    /// `m^n` lattice points: cell centres if `centred`, else including the
    /// faces.
    pub fn lattice(&self, m: usize, centred: bool) -> Vec<Vec<f64>> {
        let n = self.dim();
        let m = m.max(1);
        let coord = |d: usize, i: usize| {
            let (a, b) = (self.lower[d], self.upper[d]);
            if centred {
                a + (i as f64 + 0.5) * (b - a) / m as f64
            } else if m == 1 {
                0.5 * (a + b)
            } else {
                a + i as f64 * (b - a) / (m - 1) as f64
            }
        };
        (0..m.pow(n as u32))
            .map(|mut idx| {
                (0..n)
                    .map(|d| {
                        let i = idx % m;
                        idx /= m;
                        coord(d, i)
                    })
                    .collect()
            })
            .collect()
    }
}

/// Parsed arithmetic expression over `x1..xn` with `+ - * / ^`, `exp`,
/// `cos`, `sin`, `sqrt` and parentheses.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub source: String,
    root: Node,
    max_var: usize,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Bin(char, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Exp,
    Cos,
    Sin,
    Sqrt,
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v = text
                .parse::<f64>()
                .map_err(|_| HartreeError::Parse(format!("bad number '{text}'")))?;
            out.push(Token::Num(v));
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^()".contains(c) {
            out.push(Token::Op(c));
            i += 1;
        } else {
            return Err(HartreeError::Parse(format!("unexpected character '{c}' in expression")));
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    max_var: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn eat(&mut self, op: char) -> bool {
        if self.peek() == Some(&Token::Op(op)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Node::Bin('+', Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Node::Bin('-', Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Node::Bin('*', Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Node::Bin('/', Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.eat('-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.eat('^') {
            return Ok(Node::Bin('^', Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        let tok = self
            .peek()
            .cloned()
            .ok_or_else(|| HartreeError::Parse("expression ends unexpectedly".into()))?;
        self.pos += 1;
        match tok {
            Token::Num(v) => Ok(Node::Num(v)),
            Token::Op('(') => {
                let e = self.expr()?;
                if !self.eat(')') {
                    return Err(HartreeError::Parse("missing ')'".into()));
                }
                Ok(e)
            }
            Token::Ident(name) => {
                if let Some(idx) = name.strip_prefix('x').and_then(|d| d.parse::<usize>().ok()) {
                    if idx == 0 {
                        return Err(HartreeError::Parse("variables are numbered from x1".into()));
                    }
                    self.max_var = self.max_var.max(idx);
                    return Ok(Node::Var(idx - 1));
                }
                let f = match name.as_str() {
                    "exp" => Func::Exp,
                    "cos" => Func::Cos,
                    "sin" => Func::Sin,
                    "sqrt" => Func::Sqrt,
                    _ => return Err(HartreeError::Parse(format!("unknown name '{name}'"))),
                };
                if !self.eat('(') {
                    return Err(HartreeError::Parse(format!("'{name}' must be followed by '('")));
                }
                let arg = self.expr()?;
                if !self.eat(')') {
                    return Err(HartreeError::Parse("missing ')'".into()));
                }
                Ok(Node::Call(f, Box::new(arg)))
            }
            Token::Op(c) => Err(HartreeError::Parse(format!("unexpected '{c}'"))),
        }
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Self> {
        let mut p = Parser {
            tokens: tokenize(src)?,
            pos: 0,
            max_var: 0,
        };
        if p.tokens.is_empty() {
            return Err(HartreeError::Parse("empty expression".into()));
        }
        let root = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(HartreeError::Parse(format!("trailing input in '{src}'")));
        }
        Ok(Expr {
            source: src.trim().to_string(),
            root,
            max_var: p.max_var,
        })
    }

    /// Largest variable index used (`x3` gives 3).
    pub fn max_var(&self) -> usize {
        self.max_var
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        eval(&self.root, x)
    }
}

fn eval(node: &Node, x: &[f64]) -> f64 {
    match node {
        Node::Num(v) => *v,
        Node::Var(i) => x.get(*i).copied().unwrap_or(f64::NAN),
        Node::Neg(a) => -eval(a, x),
        Node::Bin(op, a, b) => {
            let (a, b) = (eval(a, x), eval(b, x));
            match op {
                '+' => a + b,
                '-' => a - b,
                '*' => a * b,
                '/' => a / b,
                _ => {
                    if b.fract() == 0.0 && b.abs() <= 64.0 {
                        a.powi(b as i32)
                    } else {
                        a.powf(b)
                    }
                }
            }
        }
        Node::Call(f, a) => {
            let a = eval(a, x);
            match f {
                Func::Exp => a.exp(),
                Func::Cos => a.cos(),
                Func::Sin => a.sin(),
                Func::Sqrt => a.sqrt(),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expression_precedence() {
        let e = Expr::parse("-x1^2 + 2*x2 - 3/4*x3 + 2^-1").unwrap();
        let x = [1.5, -2.0, 4.0];
        let want = -(1.5f64 * 1.5) + 2.0 * -2.0 - 3.0 / 4.0 * 4.0 + 0.5;
        assert!((e.eval(&x) - want).abs() < 1e-15);
        assert_eq!(e.max_var(), 3);
        let e = Expr::parse("exp(-(x1^2 + x2^2)) * cos(x3) + 1.5e-1").unwrap();
        let want = (-(0.09f64 + 0.16)).exp() * 0.7f64.cos() + 0.15;
        assert!((e.eval(&[0.3, 0.4, 0.7]) - want).abs() < 1e-15);
        assert!((Expr::parse("2^3^2").unwrap().eval(&[]) - 512.0).abs() < 1e-12);
    }

    #[test]
    fn expression_errors() {
        for bad in ["", "x1 +", "(x1", "foo(x1)", "x0", "x1 $ 2", "cos x1", "1 2"] {
            assert!(Expr::parse(bad).is_err(), "{bad}");
        }
        assert!(PotentialField::parse(3, "expr:x4").is_err());
    }

    #[test]
    fn catalog_gradients_match_differences() {
        let x = [0.7, -0.4, 0.3, 0.2];
        for spec in ["quadratic:0.5", "double_well:1,1.2,0.7", "ring:2,1.5,0.3", "linear:1,2,3,4"] {
            let v = PotentialField::parse(4, spec).unwrap();
            let g = v.gradient(&x);
            let h = v.hessian(&x);
            for i in 0..4 {
                let s = 1e-6;
                let mut a = x.to_vec();
                let mut b = x.to_vec();
                a[i] += s;
                b[i] -= s;
                let fd = (v.value(&a) - v.value(&b)) / (2.0 * s);
                assert!((fd - g[i]).abs() < 1e-8, "{spec} g{i}");
                let ga = v.gradient(&a);
                let gb = v.gradient(&b);
                for j in 0..4 {
                    let fd = (ga[j] - gb[j]) / (2.0 * s);
                    assert!((fd - h[(j, i)]).abs() < 1e-6, "{spec} h{j}{i}");
                }
            }
        }
    }

    #[test]
    fn expression_derivatives_by_differences() {
        let v = PotentialField::parse(3, "expr: x1^2*x2 + cos(x3)").unwrap();
        let x = [0.5, 1.5, 0.25];
        let g = v.gradient(&x);
        assert!((g[0] - 2.0 * 0.5 * 1.5).abs() < 1e-9);
        assert!((g[1] - 0.25).abs() < 1e-9);
        assert!((g[2] + 0.25f64.sin()).abs() < 1e-9);
        let h = v.hessian(&x);
        assert!((h[(0, 1)] - 1.0).abs() < 1e-5);
        assert!((h[(2, 2)] + 0.25f64.cos()).abs() < 1e-5);
    }

    #[test]
    fn specs_round_trip_and_validate() {
        for spec in ["constant:0.3", "quadratic:2", "double_well:1,1,1", "ring:1,1.5,1", "expr:x1^2 + x2"] {
            let v = PotentialField::parse(3, spec).unwrap();
            assert_eq!(PotentialField::parse(3, &v.to_string()).unwrap(), v);
        }
        assert!(PotentialField::parse(3, "linear:1,2").is_err());
        assert!(PotentialField::parse(3, "quadratic:1,2").is_err());
        assert!(PotentialField::parse(3, "bowl").is_err());
        assert!(PotentialField::parse(3, "ring:1,0").is_err());
        let v = PotentialField::parse(3, "quadratic").unwrap();
        let bx = SampleBox::cube(3, 2.0).unwrap();
        assert_eq!(v.lower_bound_check(&bx, 5).unwrap(), 1.0);
        let neg = PotentialField::parse(3, "constant:-1.5").unwrap();
        assert!(neg.lower_bound_check(&bx, 3).is_err());
    }

    #[test]
    fn lattice_counts_and_bounds() {
        let bx = SampleBox::new(vec![-1.0, 0.0], vec![1.0, 2.0]).unwrap();
        let pts = bx.lattice(4, true);
        assert_eq!(pts.len(), 16);
        assert!(pts.iter().all(|p| bx.contains(p, 0.0)));
        assert!(SampleBox::new(vec![1.0], vec![0.0]).is_err());
    }
}
