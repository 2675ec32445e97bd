//! Closed-form expressions in `x`, `y` and `r = |(x, y)|`.
//!
//! ```text
//! expr    := cmp
//! cmp     := sum (("<" | "<=" | ">" | ">=") sum)?
//! sum     := product (("+" | "-") product)*
//! product := unary (("*" | "/") unary)*
//! unary   := "-" unary | power
//! power   := atom ("^" unary)?
//! atom    := number | name | name "(" expr ("," expr)* ")" | "(" expr ")" | "|" expr "|"
//! ```
//!
//! Comparisons evaluate to 1 or 0. Functions: `abs sqrt exp ln sin cos tan pos min max
//! pow if piecewise`; `piecewise(c1, v1, c2, v2, ..., default)` returns the value of the
//! first true condition. Constants `pi` and `e`.

use std::fmt;

use crate::error::{Error, Result};
use crate::grid_kernel::Point;

#[derive(Clone, Copy, Debug, PartialEq)]
enum Var {
    X,
    Y,
    R,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Lt,
    Le,
    Gt,
    Ge,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Func {
    Abs,
    Sqrt,
    Exp,
    Ln,
    Sin,
    Cos,
    Tan,
    Pos,
    Min,
    Max,
    Pow,
    If,
    Piecewise,
}

impl Func {
    fn lookup(name: &str) -> Option<Self> {
        Some(match name {
            "abs" => Func::Abs,
            "sqrt" => Func::Sqrt,
            "exp" => Func::Exp,
            "ln" | "log" => Func::Ln,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "pos" => Func::Pos,
            "min" => Func::Min,
            "max" => Func::Max,
            "pow" => Func::Pow,
            "if" => Func::If,
            "piecewise" => Func::Piecewise,
            _ => return None,
        })
    }

    fn arity_ok(&self, n: usize) -> bool {
        match self {
            Func::Min | Func::Max => n >= 1,
            Func::Pow => n == 2,
            Func::If => n == 3,
            Func::Piecewise => n >= 1 && n % 2 == 1,
            _ => n == 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Num(f64),
    Var(Var),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

impl Node {
    fn eval(&self, p: Point) -> f64 {
        match self {
            Node::Num(v) => *v,
            Node::Var(Var::X) => p[0],
            Node::Var(Var::Y) => p[1],
            Node::Var(Var::R) => p[0].hypot(p[1]),
            Node::Neg(a) => -a.eval(p),
            Node::Bin(op, a, b) => {
                let (a, b) = (a.eval(p), b.eval(p));
                let truth = |c: bool| if c { 1.0 } else { 0.0 };
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                    BinOp::Pow => a.powf(b),
                    BinOp::Lt => truth(a < b),
                    BinOp::Le => truth(a <= b),
                    BinOp::Gt => truth(a > b),
                    BinOp::Ge => truth(a >= b),
                }
            }
            Node::Call(f, args) => {
                let arg = |i: usize| args[i].eval(p);
                match f {
                    Func::Abs => arg(0).abs(),
                    Func::Sqrt => arg(0).sqrt(),
                    Func::Exp => arg(0).exp(),
                    Func::Ln => arg(0).ln(),
                    Func::Sin => arg(0).sin(),
                    Func::Cos => arg(0).cos(),
                    Func::Tan => arg(0).tan(),
                    Func::Pos => arg(0).max(0.0),
                    Func::Min => args.iter().map(|a| a.eval(p)).fold(f64::INFINITY, f64::min),
                    Func::Max => args
                        .iter()
                        .map(|a| a.eval(p))
                        .fold(f64::NEG_INFINITY, f64::max),
                    Func::Pow => arg(0).powf(arg(1)),
                    Func::If => {
                        if arg(0) != 0.0 {
                            arg(1)
                        } else {
                            arg(2)
                        }
                    }
                    Func::Piecewise => {
                        for pair in args.chunks(2) {
                            if pair.len() == 1 {
                                return pair[0].eval(p);
                            }
                            if pair[0].eval(p) != 0.0 {
                                return pair[1].eval(p);
                            }
                        }
                        f64::NAN
                    }
                }
            }
        }
    }

    fn is_constant(&self) -> bool {
        match self {
            Node::Num(_) => true,
            Node::Var(_) => false,
            Node::Neg(a) => a.is_constant(),
            Node::Bin(_, a, b) => a.is_constant() && b.is_constant(),
            Node::Call(_, args) => args.iter().all(Node::is_constant),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Num(f64),
    Name(String),
    Op(&'static str),
}

fn tokenize(src: &str) -> Result<Vec<(Token, usize)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && ((bytes[i] as char).is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &src[start..i];
            let v = text.parse::<f64>().map_err(|_| {
                Error::Expression(format!("bad number '{text}' at column {}", start + 1))
            })?;
            out.push((Token::Num(v), start));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len()
                && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
            {
                i += 1;
            }
            out.push((Token::Name(src[start..i].to_string()), start));
        } else {
            let two = src.get(i..i + 2).unwrap_or("");
            let op: &'static str = match two {
                "<=" => "<=",
                ">=" => ">=",
                "**" => "^",
                _ => match c {
                    '+' => "+",
                    '-' => "-",
                    '*' => "*",
                    '/' => "/",
                    '^' => "^",
                    '(' => "(",
                    ')' => ")",
                    ',' => ",",
                    '|' => "|",
                    '<' => "<",
                    '>' => ">",
                    _ => {
                        return Err(Error::Expression(format!(
                            "unexpected '{c}' at column {}",
                            i + 1
                        )))
                    }
                },
            };
            out.push((Token::Op(op), i));
            i += if matches!(two, "<=" | ">=" | "**") {
                2
            } else {
                1
            };
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: &'a [(Token, usize)],
    pos: usize,
    len: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|t| &t.0)
    }

    fn column(&self) -> usize {
        self.tokens
            .get(self.pos)
            .map(|t| t.1 + 1)
            .unwrap_or(self.len + 1)
    }

    fn fail<T>(&self, what: &str) -> Result<T> {
        Err(Error::Expression(format!(
            "{what} at column {}",
            self.column()
        )))
    }

    fn eat(&mut self, op: &str) -> bool {
        let hit = matches!(self.peek(), Some(Token::Op(o)) if *o == op);
        if hit {
            self.pos += 1;
        }
        hit
    }

    fn expect(&mut self, op: &str) -> Result<()> {
        if self.eat(op) {
            Ok(())
        } else {
            self.fail(&format!("expected '{op}'"))
        }
    }

    fn cmp(&mut self) -> Result<Node> {
        let lhs = self.sum()?;
        for (sym, op) in [
            ("<=", BinOp::Le),
            (">=", BinOp::Ge),
            ("<", BinOp::Lt),
            (">", BinOp::Gt),
        ] {
            if self.eat(sym) {
                let rhs = self.sum()?;
                return Ok(Node::Bin(op, Box::new(lhs), Box::new(rhs)));
            }
        }
        Ok(lhs)
    }

    fn sum(&mut self) -> Result<Node> {
        let mut lhs = self.product()?;
        loop {
            let op = if self.eat("+") {
                BinOp::Add
            } else if self.eat("-") {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            let rhs = self.product()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn product(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat("*") {
                BinOp::Mul
            } else if self.eat("/") {
                BinOp::Div
            } else {
                return Ok(lhs);
            };
            let rhs = self.unary()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.eat("-") {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        let base = self.atom()?;
        if self.eat("^") {
            let exp = self.unary()?;
            return Ok(Node::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        match self.peek().cloned() {
            Some(Token::Num(v)) => {
                self.pos += 1;
                Ok(Node::Num(v))
            }
            Some(Token::Name(name)) => {
                self.pos += 1;
                match name.as_str() {
                    "x" => return Ok(Node::Var(Var::X)),
                    "y" => return Ok(Node::Var(Var::Y)),
                    "r" => return Ok(Node::Var(Var::R)),
                    "pi" => return Ok(Node::Num(std::f64::consts::PI)),
                    "e" => return Ok(Node::Num(std::f64::consts::E)),
                    _ => {}
                }
                let Some(func) = Func::lookup(&name) else {
                    self.pos -= 1;
                    return self.fail(&format!("unknown name '{name}'"));
                };
                self.expect("(")?;
                let mut args = vec![self.cmp()?];
                while self.eat(",") {
                    args.push(self.cmp()?);
                }
                self.expect(")")?;
                if !func.arity_ok(args.len()) {
                    return self.fail(&format!(
                        "wrong number of arguments ({}) to '{name}'",
                        args.len()
                    ));
                }
                Ok(Node::Call(func, args))
            }
            Some(Token::Op("(")) => {
                self.pos += 1;
                let inner = self.cmp()?;
                self.expect(")")?;
                Ok(inner)
            }
            Some(Token::Op("|")) => {
                self.pos += 1;
                let inner = self.cmp()?;
                self.expect("|")?;
                Ok(Node::Call(Func::Abs, vec![inner]))
            }
            Some(_) => self.fail("unexpected token"),
            None => self.fail("unexpected end of expression"),
        }
    }
}

/// A parsed expression; serializes as its source text.
#[derive(Clone, PartialEq)]
pub struct Expression {
    source: String,
    root: Node,
}

impl Expression {
    pub fn parse(source: &str) -> Result<Self> {
        let tokens = tokenize(source)?;
        let mut parser = Parser {
            tokens: &tokens,
            pos: 0,
            len: source.len(),
        };
        let root = parser.cmp()?;
        if parser.pos != tokens.len() {
            return parser.fail("trailing input");
        }
        Ok(Self {
            source: source.to_string(),
            root,
        })
    }

    pub fn eval(&self, p: Point) -> f64 {
        self.root.eval(p)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Value when the expression does not depend on the point.
    pub fn constant_value(&self) -> Option<f64> {
        self.root.is_constant().then(|| self.root.eval([0.0, 0.0]))
    }
}

impl fmt::Debug for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expression({:?})", self.source)
    }
}

impl serde::Serialize for Expression {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.source)
    }
}

impl<'de> serde::Deserialize<'de> for Expression {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Expression::parse(&s).map_err(serde::de::Error::custom)
    }
}
