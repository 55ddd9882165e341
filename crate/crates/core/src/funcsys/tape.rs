//! Flat evaluation program compiled from a set of expressions, with common
//! subexpressions shared.

use std::collections::HashMap;

use crate::interval::Interval;

use super::expr::{Expr, Node};
use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Const(f64, Interval),
    Var(u32),
    Add(u32, u32),
    Sub(u32, u32),
    Mul(u32, u32),
    Div(u32, u32),
    Neg(u32),
    Pow(u32, u32),
    Sin(u32),
    Cos(u32),
    Exp(u32),
    Log(u32),
    Sqrt(u32),
}

#[derive(Hash, PartialEq, Eq)]
enum Key {
    Const(u64, u64, u64),
    Var(u32),
    Bin(u8, u32, u32),
    Un(u8, u32),
    Pow(u32, u32),
}

fn key_of(op: &Op) -> Key {
    match *op {
        Op::Const(v, e) => Key::Const(v.to_bits(), e.lo().to_bits(), e.hi().to_bits()),
        Op::Var(i) => Key::Var(i),
        Op::Add(a, b) => Key::Bin(0, a, b),
        Op::Sub(a, b) => Key::Bin(1, a, b),
        Op::Mul(a, b) => Key::Bin(2, a, b),
        Op::Div(a, b) => Key::Bin(3, a, b),
        Op::Neg(a) => Key::Un(0, a),
        Op::Sin(a) => Key::Un(1, a),
        Op::Cos(a) => Key::Un(2, a),
        Op::Exp(a) => Key::Un(3, a),
        Op::Log(a) => Key::Un(4, a),
        Op::Sqrt(a) => Key::Un(5, a),
        Op::Pow(a, k) => Key::Pow(a, k),
    }
}

/// Compiled evaluation program with one output slot per input expression.
#[derive(Debug, Clone)]
pub struct Tape {
    ops: Vec<Op>,
    outputs: Vec<u32>,
    nvars: usize,
}

struct Builder {
    ops: Vec<Op>,
    index: HashMap<Key, u32>,
    by_ptr: HashMap<*const Node, u32>,
}

impl Builder {
    fn push(&mut self, op: Op) -> u32 {
        let key = key_of(&op);
        if let Some(&slot) = self.index.get(&key) {
            return slot;
        }
        let slot = self.ops.len() as u32;
        self.ops.push(op);
        self.index.insert(key, slot);
        slot
    }

    fn visit(&mut self, e: &Expr) -> u32 {
        let ptr = e.node() as *const Node;
        if let Some(&slot) = self.by_ptr.get(&ptr) {
            return slot;
        }
        let op = match e.node() {
            Node::Const { value, enclosure } => Op::Const(*value, *enclosure),
            Node::Var(i) => Op::Var(*i as u32),
            Node::Add(a, b) => Op::Add(self.visit(a), self.visit(b)),
            Node::Sub(a, b) => Op::Sub(self.visit(a), self.visit(b)),
            Node::Mul(a, b) => Op::Mul(self.visit(a), self.visit(b)),
            Node::Div(a, b) => Op::Div(self.visit(a), self.visit(b)),
            Node::Neg(a) => Op::Neg(self.visit(a)),
            Node::Pow(a, k) => Op::Pow(self.visit(a), *k),
            Node::Sin(a) => Op::Sin(self.visit(a)),
            Node::Cos(a) => Op::Cos(self.visit(a)),
            Node::Exp(a) => Op::Exp(self.visit(a)),
            Node::Log(a) => Op::Log(self.visit(a)),
            Node::Sqrt(a) => Op::Sqrt(self.visit(a)),
        };
        let slot = self.push(op);
        self.by_ptr.insert(ptr, slot);
        slot
    }
}

impl Tape {
    pub fn compile(exprs: &[Expr], nvars: usize) -> Tape {
        let mut b = Builder {
            ops: Vec::new(),
            index: HashMap::new(),
            by_ptr: HashMap::new(),
        };
        let outputs = exprs.iter().map(|e| b.visit(e)).collect();
        Tape {
            ops: b.ops,
            outputs,
            nvars,
        }
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn n_outputs(&self) -> usize {
        self.outputs.len()
    }

    fn check_arity(&self, got: usize) -> Result<(), EvalError> {
        if got < self.nvars {
            return Err(EvalError::Arity {
                expected: self.nvars,
                got,
            });
        }
        Ok(())
    }

    pub fn eval_interval(&self, x: &[Interval]) -> Result<Vec<Interval>, EvalError> {
        self.check_arity(x.len())?;
        let mut s: Vec<Interval> = Vec::with_capacity(self.ops.len());
        for op in &self.ops {
            let v = match *op {
                Op::Const(_, e) => e,
                Op::Var(i) => x[i as usize],
                Op::Add(a, b) => s[a as usize] + s[b as usize],
                Op::Sub(a, b) => s[a as usize] - s[b as usize],
                Op::Mul(a, b) => s[a as usize] * s[b as usize],
                Op::Div(a, b) => s[a as usize].div(s[b as usize])?,
                Op::Neg(a) => -s[a as usize],
                Op::Pow(a, k) => s[a as usize].powi(k),
                Op::Sin(a) => s[a as usize].sin(),
                Op::Cos(a) => s[a as usize].cos(),
                Op::Exp(a) => s[a as usize].exp(),
                Op::Log(a) => s[a as usize].ln()?,
                Op::Sqrt(a) => s[a as usize].sqrt()?,
            };
            s.push(v);
        }
        Ok(self.outputs.iter().map(|&o| s[o as usize]).collect())
    }

    pub fn eval_point(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        self.check_arity(x.len())?;
        let mut s: Vec<f64> = Vec::with_capacity(self.ops.len());
        for op in &self.ops {
            let v = match *op {
                Op::Const(v, _) => v,
                Op::Var(i) => x[i as usize],
                Op::Add(a, b) => s[a as usize] + s[b as usize],
                Op::Sub(a, b) => s[a as usize] - s[b as usize],
                Op::Mul(a, b) => s[a as usize] * s[b as usize],
                Op::Div(a, b) => {
                    let d = s[b as usize];
                    if d == 0.0 {
                        return Err(EvalError::Domain("division by zero"));
                    }
                    s[a as usize] / d
                }
                Op::Neg(a) => -s[a as usize],
                Op::Pow(a, k) => s[a as usize].powi(k as i32),
                Op::Sin(a) => s[a as usize].sin(),
                Op::Cos(a) => s[a as usize].cos(),
                Op::Exp(a) => s[a as usize].exp(),
                Op::Log(a) => {
                    let v = s[a as usize];
                    if v <= 0.0 {
                        return Err(EvalError::Domain("log of a non-positive value"));
                    }
                    v.ln()
                }
                Op::Sqrt(a) => {
                    let v = s[a as usize];
                    if v < 0.0 {
                        return Err(EvalError::Domain("sqrt of a negative value"));
                    }
                    v.sqrt()
                }
            };
            s.push(v);
        }
        let out: Vec<f64> = self.outputs.iter().map(|&o| s[o as usize]).collect();
        if out.iter().any(|v| v.is_nan()) {
            return Err(EvalError::Domain("undefined value"));
        }
        Ok(out)
    }
}
