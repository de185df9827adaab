//! MiniSol abstract syntax tree.

use std::fmt;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};

/// A position inside a source file. Lines and columns are 1-based; `offset`
/// and `len` are byte offsets into the original text.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
pub struct SourceLocation {
    pub line: u32,
    pub column: u32,
    pub offset: u32,
    pub len: u32,
}

impl SourceLocation {
    pub fn new(line: u32, column: u32, offset: u32, len: u32) -> Self {
        Self {
            line,
            column,
            offset,
            len,
        }
    }

    /// Smallest location covering both `self` and `other`.
    pub fn to(self, other: SourceLocation) -> SourceLocation {
        let end = (other.offset + other.len).max(self.offset + self.len);
        SourceLocation {
            len: end - self.offset,
            ..self
        }
    }
}

impl fmt::Display for SourceLocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceUnit {
    pub path: String,
    pub contracts: Vec<ContractDef>,
    /// Physical lines in the source, blank and comment lines included.
    pub line_count: usize,
}

impl SourceUnit {
    pub fn contract(&self, name: &str) -> Option<&ContractDef> {
        self.contracts.iter().find(|c| c.name == name)
    }

    /// Copy of the tree with every location zeroed, for structural comparison.
    pub fn without_locations(&self) -> SourceUnit {
        let mut unit = self.clone();
        for c in &mut unit.contracts {
            c.loc = SourceLocation::default();
            for b in &mut c.base_args {
                strip_base_args(b);
            }
            for v in &mut c.state_vars {
                v.decl.loc = SourceLocation::default();
                if let Some(init) = &mut v.init {
                    strip_expr(init);
                }
            }
            for e in &mut c.events {
                e.loc = SourceLocation::default();
                for p in &mut e.params {
                    p.loc = SourceLocation::default();
                }
            }
            if let Some(ctor) = &mut c.constructor {
                strip_function(ctor);
            }
            for f in &mut c.functions {
                strip_function(f);
            }
        }
        unit
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContractDef {
    pub name: String,
    /// Declared inheritance list, left to right.
    pub bases: Vec<String>,
    /// Base constructor arguments given in the inheritance list (`is B(1)`).
    pub base_args: Vec<BaseArgs>,
    pub state_vars: Vec<StateVar>,
    pub events: Vec<EventDef>,
    pub constructor: Option<FunctionDef>,
    pub functions: Vec<FunctionDef>,
    pub loc: SourceLocation,
}

impl ContractDef {
    pub fn function(&self, name: &str) -> Option<&FunctionDef> {
        self.functions.iter().find(|f| f.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BaseArgs {
    pub base: String,
    pub args: Vec<Expression>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateVar {
    pub decl: VarDecl,
    pub constant: bool,
    pub init: Option<Expression>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventDef {
    pub name: String,
    pub params: Vec<VarDecl>,
    pub loc: SourceLocation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Visibility {
    Public,
    External,
    Internal,
    Private,
}

impl Visibility {
    /// Callable from outside the contract.
    pub fn is_entry(self) -> bool {
        matches!(self, Visibility::Public | Visibility::External)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Visibility::Public => "public",
            Visibility::External => "external",
            Visibility::Internal => "internal",
            Visibility::Private => "private",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FunctionKind {
    Function,
    Constructor,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionDef {
    pub name: String,
    pub kind: FunctionKind,
    pub params: Vec<VarDecl>,
    pub returns: Vec<TypeName>,
    pub visibility: Visibility,
    pub is_payable: bool,
    /// `view` / `pure` annotations; kept only so printing round-trips.
    pub mutability: Option<String>,
    /// Base constructor calls in a constructor header (`constructor(..) B(x)`).
    pub base_calls: Vec<BaseArgs>,
    pub body: Block,
    pub loc: SourceLocation,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarDecl {
    pub name: String,
    pub ty: TypeName,
    pub loc: SourceLocation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", content = "bits", rename_all = "lowercase")]
pub enum ScalarType {
    Uint(u16),
    Int(u16),
    Bool,
    Address,
}

impl ScalarType {
    pub const ADDRESS_BITS: u16 = 160;

    pub fn bits(self) -> u16 {
        match self {
            ScalarType::Uint(w) | ScalarType::Int(w) => w,
            ScalarType::Bool => 1,
            ScalarType::Address => Self::ADDRESS_BITS,
        }
    }

    pub fn is_signed(self) -> bool {
        matches!(self, ScalarType::Int(_))
    }

    /// Inclusive value range of the type.
    pub fn bounds(self) -> (BigInt, BigInt) {
        match self {
            ScalarType::Uint(w) => (BigInt::from(0), (BigInt::from(1) << w) - 1),
            ScalarType::Int(w) => {
                let half = BigInt::from(1) << (w - 1);
                (-half.clone(), half - 1)
            }
            ScalarType::Bool => (BigInt::from(0), BigInt::from(1)),
            ScalarType::Address => (BigInt::from(0), (BigInt::from(1) << Self::ADDRESS_BITS) - 1),
        }
    }
}

impl fmt::Display for ScalarType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarType::Uint(w) => write!(f, "uint{w}"),
            ScalarType::Int(w) => write!(f, "int{w}"),
            ScalarType::Bool => f.write_str("bool"),
            ScalarType::Address => f.write_str("address"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TypeName {
    Scalar(ScalarType),
    Mapping { key: ScalarType, value: ScalarType },
}

impl TypeName {
    pub fn scalar(self) -> Option<ScalarType> {
        match self {
            TypeName::Scalar(s) => Some(s),
            TypeName::Mapping { .. } => None,
        }
    }
}

impl fmt::Display for TypeName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeName::Scalar(s) => s.fmt(f),
            TypeName::Mapping { key, value } => write!(f, "mapping({key} => {value})"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Block {
    pub stmts: Vec<Statement>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Statement {
    pub kind: StmtKind,
    pub loc: SourceLocation,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StmtKind {
    VarDecl {
        decl: VarDecl,
        init: Option<Expression>,
    },
    Assign {
        target: Expression,
        value: Expression,
    },
    If {
        cond: Expression,
        then_branch: Block,
        else_branch: Option<Block>,
    },
    While {
        cond: Expression,
        body: Block,
    },
    For {
        init: Option<Box<Statement>>,
        cond: Option<Expression>,
        update: Option<Box<Statement>>,
        body: Block,
    },
    Require {
        cond: Expression,
        message: Option<String>,
    },
    Assert {
        cond: Expression,
    },
    Return {
        value: Option<Expression>,
    },
    Revert {
        message: Option<String>,
    },
    /// Internal function call evaluated for its effects.
    Expr(Expression),
    ExternalCall(ExternalCall),
    Emit {
        event: String,
        args: Vec<Expression>,
    },
    Block(Block),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CallKind {
    Transfer,
    Send,
    Call,
}

impl CallKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CallKind::Transfer => "transfer",
            CallKind::Send => "send",
            CallKind::Call => "call",
        }
    }
}

/// How the success flag of an external call is consumed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CallResultUse {
    Ignored,
    /// `require(target.send(v));`
    Required,
    /// `bool ok = target.send(v);` or `ok = target.send(v);`
    Bound {
        name: String,
        declared: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExternalCall {
    pub kind: CallKind,
    pub target: Expression,
    pub value: Option<Expression>,
    pub result: CallResultUse,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expression {
    pub kind: ExprKind,
    pub loc: SourceLocation,
}

impl Expression {
    pub fn new(kind: ExprKind, loc: SourceLocation) -> Self {
        Self { kind, loc }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExprKind {
    Literal(BigInt),
    Bool(bool),
    Ident(String),
    Binary {
        op: BinOp,
        lhs: Box<Expression>,
        rhs: Box<Expression>,
    },
    Unary {
        op: UnOp,
        operand: Box<Expression>,
    },
    Index {
        base: Box<Expression>,
        key: Box<Expression>,
    },
    Env(EnvMember),
    Call {
        callee: String,
        args: Vec<Expression>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvMember {
    Timestamp,
    Sender,
    Value,
    SelfBalance,
}

impl EnvMember {
    pub fn as_str(self) -> &'static str {
        match self {
            EnvMember::Timestamp => "block.timestamp",
            EnvMember::Sender => "msg.sender",
            EnvMember::Value => "msg.value",
            EnvMember::SelfBalance => "address(this).balance",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Mod => "%",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge | BinOp::Eq | BinOp::Ne
        )
    }

    pub fn is_arithmetic(self) -> bool {
        matches!(
            self,
            BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Mod
        )
    }

    pub fn is_logical(self) -> bool {
        matches!(self, BinOp::And | BinOp::Or)
    }

    pub fn is_commutative(self) -> bool {
        matches!(
            self,
            BinOp::Add | BinOp::Mul | BinOp::Eq | BinOp::Ne | BinOp::And | BinOp::Or
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum UnOp {
    Not,
    Neg,
}

impl UnOp {
    pub fn symbol(self) -> &'static str {
        match self {
            UnOp::Not => "!",
            UnOp::Neg => "-",
        }
    }
}

fn strip_function(f: &mut FunctionDef) {
    f.loc = SourceLocation::default();
    for p in &mut f.params {
        p.loc = SourceLocation::default();
    }
    for b in &mut f.base_calls {
        strip_base_args(b);
    }
    strip_block(&mut f.body);
}

fn strip_base_args(b: &mut BaseArgs) {
    for a in &mut b.args {
        strip_expr(a);
    }
}

fn strip_block(b: &mut Block) {
    for s in &mut b.stmts {
        strip_stmt(s);
    }
}

fn strip_stmt(s: &mut Statement) {
    s.loc = SourceLocation::default();
    match &mut s.kind {
        StmtKind::VarDecl { decl, init } => {
            decl.loc = SourceLocation::default();
            if let Some(e) = init {
                strip_expr(e);
            }
        }
        StmtKind::Assign { target, value } => {
            strip_expr(target);
            strip_expr(value);
        }
        StmtKind::If {
            cond,
            then_branch,
            else_branch,
        } => {
            strip_expr(cond);
            strip_block(then_branch);
            if let Some(b) = else_branch {
                strip_block(b);
            }
        }
        StmtKind::While { cond, body } => {
            strip_expr(cond);
            strip_block(body);
        }
        StmtKind::For {
            init,
            cond,
            update,
            body,
        } => {
            if let Some(s) = init {
                strip_stmt(s);
            }
            if let Some(c) = cond {
                strip_expr(c);
            }
            if let Some(s) = update {
                strip_stmt(s);
            }
            strip_block(body);
        }
        StmtKind::Require { cond, .. } | StmtKind::Assert { cond } => strip_expr(cond),
        StmtKind::Return { value } => {
            if let Some(e) = value {
                strip_expr(e);
            }
        }
        StmtKind::Revert { .. } => {}
        StmtKind::Expr(e) => strip_expr(e),
        StmtKind::ExternalCall(call) => {
            strip_expr(&mut call.target);
            if let Some(v) = &mut call.value {
                strip_expr(v);
            }
        }
        StmtKind::Emit { args, .. } => args.iter_mut().for_each(strip_expr),
        StmtKind::Block(b) => strip_block(b),
    }
}

fn strip_expr(e: &mut Expression) {
    e.loc = SourceLocation::default();
    match &mut e.kind {
        ExprKind::Binary { lhs, rhs, .. } => {
            strip_expr(lhs);
            strip_expr(rhs);
        }
        ExprKind::Unary { operand, .. } => strip_expr(operand),
        ExprKind::Index { base, key } => {
            strip_expr(base);
            strip_expr(key);
        }
        ExprKind::Call { args, .. } => args.iter_mut().for_each(strip_expr),
        ExprKind::Literal(_) | ExprKind::Bool(_) | ExprKind::Ident(_) | ExprKind::Env(_) => {}
    }
}

/// Calls `f` on every expression in the block, outermost first.
pub fn walk_block_exprs<'a>(block: &'a Block, f: &mut dyn FnMut(&'a Expression)) {
    for s in &block.stmts {
        walk_stmt_exprs(s, f);
    }
}

pub fn walk_stmt_exprs<'a>(s: &'a Statement, f: &mut dyn FnMut(&'a Expression)) {
    match &s.kind {
        StmtKind::VarDecl { init, .. } => {
            if let Some(e) = init {
                walk_expr(e, f);
            }
        }
        StmtKind::Assign { target, value } => {
            walk_expr(target, f);
            walk_expr(value, f);
        }
        StmtKind::If {
            cond,
            then_branch,
            else_branch,
        } => {
            walk_expr(cond, f);
            walk_block_exprs(then_branch, f);
            if let Some(b) = else_branch {
                walk_block_exprs(b, f);
            }
        }
        StmtKind::While { cond, body } => {
            walk_expr(cond, f);
            walk_block_exprs(body, f);
        }
        StmtKind::For {
            init,
            cond,
            update,
            body,
        } => {
            if let Some(s) = init {
                walk_stmt_exprs(s, f);
            }
            if let Some(c) = cond {
                walk_expr(c, f);
            }
            if let Some(s) = update {
                walk_stmt_exprs(s, f);
            }
            walk_block_exprs(body, f);
        }
        StmtKind::Require { cond, .. } | StmtKind::Assert { cond } => walk_expr(cond, f),
        StmtKind::Return { value } => {
            if let Some(e) = value {
                walk_expr(e, f);
            }
        }
        StmtKind::Revert { .. } => {}
        StmtKind::Expr(e) => walk_expr(e, f),
        StmtKind::ExternalCall(call) => {
            walk_expr(&call.target, f);
            if let Some(v) = &call.value {
                walk_expr(v, f);
            }
        }
        StmtKind::Emit { args, .. } => args.iter().for_each(|a| walk_expr(a, f)),
        StmtKind::Block(b) => walk_block_exprs(b, f),
    }
}

pub fn walk_expr<'a>(e: &'a Expression, f: &mut dyn FnMut(&'a Expression)) {
    f(e);
    match &e.kind {
        ExprKind::Binary { lhs, rhs, .. } => {
            walk_expr(lhs, f);
            walk_expr(rhs, f);
        }
        ExprKind::Unary { operand, .. } => walk_expr(operand, f),
        ExprKind::Index { base, key } => {
            walk_expr(base, f);
            walk_expr(key, f);
        }
        ExprKind::Call { args, .. } => args.iter().for_each(|a| walk_expr(a, f)),
        ExprKind::Literal(_) | ExprKind::Bool(_) | ExprKind::Ident(_) | ExprKind::Env(_) => {}
    }
}
