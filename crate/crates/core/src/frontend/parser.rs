//! Recursive descent parser for MiniSol.

use std::collections::HashSet;

use num_bigint::BigInt;

use super::ast::*;
use super::lexer::{Lexer, Tok, Token};
use super::FrontendError;

type PResult<T> = Result<T, FrontendError>;

const UNSUPPORTED_TOP: &[&str] = &[
    "library",
    "interface",
    "import",
    "abstract",
    "using",
    "struct",
    "enum",
];
const UNSUPPORTED_MEMBER: &[&str] = &["modifier", "struct", "enum", "using", "fallback", "receive"];
const UNSUPPORTED_STMT: &[&str] = &[
    "assembly",
    "do",
    "break",
    "continue",
    "delete",
    "unchecked",
    "try",
    "var",
    "selfdestruct",
    "suicide",
];
const UNSUPPORTED_BUILTINS: &[&str] = &[
    "keccak256",
    "sha3",
    "sha256",
    "ripemd160",
    "ecrecover",
    "blockhash",
    "gasleft",
    "addmod",
    "mulmod",
    "selfdestruct",
    "suicide",
    "abi",
    "type",
];
const UNSUPPORTED_TYPES: &[&str] = &["string", "bytes", "byte", "fixed", "ufixed"];

pub struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    path: &'a str,
    contract_name: String,
}

impl<'a> Parser<'a> {
    pub fn new(source: &'a str, path: &'a str) -> PResult<Self> {
        let tokens = Lexer::new(source, path).tokenize()?;
        Ok(Self {
            tokens,
            pos: 0,
            path,
            contract_name: String::new(),
        })
    }

    pub fn parse_contracts(&mut self) -> PResult<Vec<ContractDef>> {
        let mut contracts: Vec<ContractDef> = Vec::new();
        while !self.at_eof() {
            if let Some(word) = self.peek_ident() {
                if UNSUPPORTED_TOP.contains(&word) {
                    return Err(self.unsupported(&format!("`{word}` declarations")));
                }
            }
            let c = self.contract()?;
            if contracts.iter().any(|o| o.name == c.name) {
                return Err(FrontendError::Duplicate {
                    path: self.path.to_string(),
                    line: c.loc.line,
                    column: c.loc.column,
                    what: format!("contract `{}`", c.name),
                });
            }
            contracts.push(c);
        }
        Ok(contracts)
    }

    // ---- token helpers ----

    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn peek_ident(&self) -> Option<&str> {
        match &self.peek().tok {
            Tok::Ident(s) => Some(s.as_str()),
            _ => None,
        }
    }

    fn at_eof(&self) -> bool {
        matches!(self.peek().tok, Tok::Eof)
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn prev_loc(&self) -> SourceLocation {
        self.tokens[self.pos.saturating_sub(1)].loc
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(&self.peek().tok, Tok::Punct(q) if *q == p)
    }

    fn is_word(&self, w: &str) -> bool {
        self.peek_ident() == Some(w)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_word(&mut self, w: &str) -> bool {
        if self.is_word(w) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> PResult<SourceLocation> {
        if self.is_punct(p) {
            Ok(self.bump().loc)
        } else {
            Err(self.error(&format!("`{p}`")))
        }
    }

    fn expect_word(&mut self, w: &str) -> PResult<SourceLocation> {
        if self.is_word(w) {
            Ok(self.bump().loc)
        } else {
            Err(self.error(&format!("`{w}`")))
        }
    }

    fn ident(&mut self) -> PResult<(String, SourceLocation)> {
        match &self.peek().tok {
            Tok::Ident(s) => {
                let s = s.clone();
                let loc = self.bump().loc;
                Ok((s, loc))
            }
            _ => Err(self.error("identifier")),
        }
    }

    fn error(&self, expected: &str) -> FrontendError {
        let t = self.peek();
        FrontendError::Syntax {
            path: self.path.to_string(),
            line: t.loc.line,
            column: t.loc.column,
            expected: expected.to_string(),
            found: t.tok.describe(),
        }
    }

    fn unsupported(&self, feature: &str) -> FrontendError {
        let t = self.peek();
        FrontendError::Unsupported {
            path: self.path.to_string(),
            line: t.loc.line,
            column: t.loc.column,
            feature: feature.to_string(),
        }
    }

    // ---- declarations ----

    fn contract(&mut self) -> PResult<ContractDef> {
        let start = self.expect_word("contract")?;
        let (name, _) = self.ident()?;
        self.contract_name = name.clone();
        let mut bases = Vec::new();
        let mut base_args = Vec::new();
        if self.eat_word("is") {
            loop {
                let (base, _) = self.ident()?;
                if self.is_punct("(") {
                    let args = self.call_args()?;
                    base_args.push(BaseArgs {
                        base: base.clone(),
                        args,
                    });
                }
                bases.push(base);
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct("{")?;
        let mut contract = ContractDef {
            name,
            bases,
            base_args,
            state_vars: Vec::new(),
            events: Vec::new(),
            constructor: None,
            functions: Vec::new(),
            loc: start,
        };
        while !self.eat_punct("}") {
            if self.at_eof() {
                return Err(self.error("`}`"));
            }
            self.member(&mut contract)?;
        }
        contract.loc = start.to(self.prev_loc());
        Ok(contract)
    }

    fn member(&mut self, contract: &mut ContractDef) -> PResult<()> {
        let word = match self.peek_ident() {
            Some(w) => w.to_string(),
            None => return Err(self.error("contract member")),
        };
        if UNSUPPORTED_MEMBER.contains(&word.as_str()) {
            return Err(self.unsupported(&format!("`{word}` definitions")));
        }
        match word.as_str() {
            "event" => {
                let ev = self.event()?;
                contract.events.push(ev);
            }
            "constructor" => {
                let loc = self.peek().loc;
                let f = self.function(FunctionKind::Constructor)?;
                self.set_constructor(contract, f, loc)?;
            }
            "function" => {
                let loc = self.peek().loc;
                let f = self.function(FunctionKind::Function)?;
                if f.kind == FunctionKind::Constructor {
                    self.set_constructor(contract, f, loc)?;
                } else {
                    if contract.functions.iter().any(|g| g.name == f.name) {
                        return Err(
                            self.duplicate(loc, &format!("function `{}` (overloading)", f.name))
                        );
                    }
                    contract.functions.push(f);
                }
            }
            _ => {
                let var = self.state_var()?;
                if contract
                    .state_vars
                    .iter()
                    .any(|v| v.decl.name == var.decl.name)
                {
                    return Err(self
                        .duplicate(var.decl.loc, &format!("state variable `{}`", var.decl.name)));
                }
                contract.state_vars.push(var);
            }
        }
        Ok(())
    }

    fn set_constructor(
        &self,
        contract: &mut ContractDef,
        f: FunctionDef,
        loc: SourceLocation,
    ) -> PResult<()> {
        if contract.constructor.is_some() {
            return Err(self.duplicate(loc, "constructor"));
        }
        contract.constructor = Some(f);
        Ok(())
    }

    fn duplicate(&self, loc: SourceLocation, what: &str) -> FrontendError {
        FrontendError::Duplicate {
            path: self.path.to_string(),
            line: loc.line,
            column: loc.column,
            what: what.to_string(),
        }
    }

    fn event(&mut self) -> PResult<EventDef> {
        let start = self.expect_word("event")?;
        let (name, _) = self.ident()?;
        self.expect_punct("(")?;
        let mut params = Vec::new();
        if !self.is_punct(")") {
            loop {
                let tloc = self.peek().loc;
                let ty = self.type_name()?;
                self.eat_word("indexed");
                let (pname, ploc) = if matches!(self.peek().tok, Tok::Ident(_)) {
                    self.ident()?
                } else {
                    (format!("_{}", params.len()), tloc)
                };
                params.push(VarDecl {
                    name: pname,
                    ty,
                    loc: tloc.to(ploc),
                });
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        self.expect_punct(";")?;
        Ok(EventDef {
            name,
            params,
            loc: start.to(self.prev_loc()),
        })
    }

    fn state_var(&mut self) -> PResult<StateVar> {
        let start = self.peek().loc;
        let ty = self.type_name()?;
        let mut constant = false;
        loop {
            match self.peek_ident() {
                Some("public" | "private" | "internal") => {
                    self.bump();
                }
                Some("constant") => {
                    self.bump();
                    constant = true;
                }
                Some("immutable") => return Err(self.unsupported("immutable state variables")),
                _ => break,
            }
        }
        let (name, nloc) = self.ident()?;
        let init = if self.eat_punct("=") {
            Some(self.expr()?)
        } else {
            None
        };
        if constant && init.is_none() {
            return Err(self.error("`=` initializer for constant"));
        }
        if matches!(ty, TypeName::Mapping { .. }) && init.is_some() {
            return Err(self.unsupported("mapping initializers"));
        }
        self.expect_punct(";")?;
        Ok(StateVar {
            decl: VarDecl {
                name,
                ty,
                loc: start.to(nloc),
            },
            constant,
            init,
        })
    }

    fn function(&mut self, kind: FunctionKind) -> PResult<FunctionDef> {
        let start = self.bump().loc; // `function` or `constructor`
        let mut kind = kind;
        let name = if kind == FunctionKind::Constructor {
            "<init>".to_string()
        } else {
            if self.is_punct("(") {
                return Err(self.unsupported("fallback functions"));
            }
            let (n, _) = self.ident()?;
            if n == self.contract_name {
                // pre-0.5 constructor syntax
                kind = FunctionKind::Constructor;
                "<init>".to_string()
            } else {
                n
            }
        };
        let params = self.params()?;
        let mut seen = HashSet::new();
        for p in &params {
            if !seen.insert(p.name.clone()) {
                return Err(self.duplicate(p.loc, &format!("parameter `{}`", p.name)));
            }
        }

        let mut visibility = None;
        let mut is_payable = false;
        let mut mutability = None;
        let mut base_calls = Vec::new();
        let mut returns = Vec::new();
        while let Some(word) = self.peek_ident().map(str::to_string) {
            match word.as_str() {
                "public" | "external" | "internal" | "private" => {
                    self.bump();
                    visibility = Some(match word.as_str() {
                        "public" => Visibility::Public,
                        "external" => Visibility::External,
                        "internal" => Visibility::Internal,
                        _ => Visibility::Private,
                    });
                }
                "payable" => {
                    self.bump();
                    is_payable = true;
                }
                "view" | "pure" | "constant" => {
                    self.bump();
                    mutability = Some(if word == "constant" {
                        "view".to_string()
                    } else {
                        word
                    });
                }
                "virtual" | "override" => {
                    self.bump();
                }
                "returns" => {
                    self.bump();
                    self.expect_punct("(")?;
                    loop {
                        returns.push(self.type_name()?);
                        if matches!(self.peek().tok, Tok::Ident(_)) {
                            return Err(self.unsupported("named return values"));
                        }
                        if !self.eat_punct(",") {
                            break;
                        }
                    }
                    self.expect_punct(")")?;
                }
                _ => {
                    if kind == FunctionKind::Constructor
                        && matches!(self.peek_at(1), Tok::Punct("("))
                    {
                        let (base, _) = self.ident()?;
                        let args = self.call_args()?;
                        base_calls.push(BaseArgs { base, args });
                    } else {
                        return Err(self.unsupported(&format!("function modifier `{word}`")));
                    }
                }
            }
        }
        if kind == FunctionKind::Constructor && !returns.is_empty() {
            return Err(self.error("`{`"));
        }
        if self.is_punct(";") {
            return Err(self.unsupported("functions without a body"));
        }
        let body = self.block()?;
        Ok(FunctionDef {
            name,
            kind,
            params,
            returns,
            visibility: visibility.unwrap_or(Visibility::Public),
            is_payable,
            mutability,
            base_calls,
            body,
            loc: start.to(self.prev_loc()),
        })
    }

    fn params(&mut self) -> PResult<Vec<VarDecl>> {
        self.expect_punct("(")?;
        let mut params = Vec::new();
        if !self.is_punct(")") {
            loop {
                let tloc = self.peek().loc;
                let ty = self.type_name()?;
                if matches!(ty, TypeName::Mapping { .. }) {
                    return Err(self.unsupported("mapping parameters"));
                }
                if self.is_word("memory") || self.is_word("storage") || self.is_word("calldata") {
                    self.bump();
                }
                let (name, nloc) = self.ident()?;
                params.push(VarDecl {
                    name,
                    ty,
                    loc: tloc.to(nloc),
                });
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        Ok(params)
    }

    fn is_type_start(&self) -> bool {
        match self.peek_ident() {
            Some(w) => {
                w == "bool"
                    || w == "address"
                    || w == "mapping"
                    || parse_int_type(w).is_some()
                    || UNSUPPORTED_TYPES.contains(&w)
                    || (w.starts_with("bytes") && w[5..].chars().all(|c| c.is_ascii_digit()))
            }
            None => false,
        }
    }

    fn type_name(&mut self) -> PResult<TypeName> {
        let word = match self.peek_ident() {
            Some(w) => w.to_string(),
            None => return Err(self.error("type name")),
        };
        if word == "mapping" {
            self.bump();
            self.expect_punct("(")?;
            let key = self.scalar_type()?;
            self.expect_punct("=>")?;
            if self.is_word("mapping") {
                return Err(self.unsupported("nested mappings"));
            }
            let value = self.scalar_type()?;
            self.expect_punct(")")?;
            return Ok(TypeName::Mapping { key, value });
        }
        Ok(TypeName::Scalar(self.scalar_type()?))
    }

    fn scalar_type(&mut self) -> PResult<ScalarType> {
        let word = match self.peek_ident() {
            Some(w) => w.to_string(),
            None => return Err(self.error("type name")),
        };
        let ty = match word.as_str() {
            "bool" => ScalarType::Bool,
            "address" => ScalarType::Address,
            w => match parse_int_type(w) {
                Some(Ok(t)) => t,
                Some(Err(())) => return Err(self.unsupported(&format!("integer width `{w}`"))),
                None => {
                    if UNSUPPORTED_TYPES.contains(&w) || w.starts_with("bytes") {
                        return Err(self.unsupported(&format!("type `{w}`")));
                    }
                    return Err(self.error("type name"));
                }
            },
        };
        self.bump();
        if ty == ScalarType::Address {
            self.eat_word("payable");
        }
        if self.is_punct("[") {
            return Err(self.unsupported("arrays"));
        }
        Ok(ty)
    }

    // ---- statements ----

    fn block(&mut self) -> PResult<Block> {
        self.expect_punct("{")?;
        let mut stmts = Vec::new();
        while !self.eat_punct("}") {
            if self.at_eof() {
                return Err(self.error("`}`"));
            }
            stmts.push(self.statement()?);
        }
        Ok(Block { stmts })
    }

    /// A statement or a braced block, as accepted after `if`/`while`/`for`.
    fn body(&mut self) -> PResult<Block> {
        if self.is_punct("{") {
            self.block()
        } else {
            Ok(Block {
                stmts: vec![self.statement()?],
            })
        }
    }

    fn statement(&mut self) -> PResult<Statement> {
        let start = self.peek().loc;
        if self.is_punct("{") {
            let b = self.block()?;
            return Ok(Statement {
                kind: StmtKind::Block(b),
                loc: start.to(self.prev_loc()),
            });
        }
        if self.is_punct("++") || self.is_punct("--") {
            let kind = self.prefix_update()?;
            self.expect_punct(";")?;
            return Ok(Statement {
                kind,
                loc: start.to(self.prev_loc()),
            });
        }
        if let Some(kind) = self.try_tuple_call()? {
            return Ok(Statement {
                kind,
                loc: start.to(self.prev_loc()),
            });
        }
        let word = self.peek_ident().map(str::to_string);
        let kind = match word.as_deref() {
            Some(w) if UNSUPPORTED_STMT.contains(&w) => {
                return Err(self.unsupported(&format!("`{w}` statements")));
            }
            Some("if") => {
                self.bump();
                self.expect_punct("(")?;
                let cond = self.expr()?;
                self.expect_punct(")")?;
                let then_branch = self.body()?;
                let else_branch = if self.eat_word("else") {
                    Some(self.body()?)
                } else {
                    None
                };
                StmtKind::If {
                    cond,
                    then_branch,
                    else_branch,
                }
            }
            Some("while") => {
                self.bump();
                self.expect_punct("(")?;
                let cond = self.expr()?;
                self.expect_punct(")")?;
                let body = self.body()?;
                StmtKind::While { cond, body }
            }
            Some("for") => self.for_stmt()?,
            Some("return") => {
                self.bump();
                let value = if self.is_punct(";") {
                    None
                } else {
                    Some(self.expr()?)
                };
                self.expect_punct(";")?;
                StmtKind::Return { value }
            }
            Some("revert") => {
                self.bump();
                self.expect_punct("(")?;
                let message = self.opt_string()?;
                self.expect_punct(")")?;
                self.expect_punct(";")?;
                StmtKind::Revert { message }
            }
            Some("throw") => {
                self.bump();
                self.expect_punct(";")?;
                StmtKind::Revert { message: None }
            }
            Some("require") => self.require_stmt()?,
            Some("assert") => {
                self.bump();
                self.expect_punct("(")?;
                let cond = self.expr()?;
                self.expect_punct(")")?;
                self.expect_punct(";")?;
                StmtKind::Assert { cond }
            }
            Some("emit") => {
                self.bump();
                let (event, _) = self.ident()?;
                let args = self.call_args()?;
                self.expect_punct(";")?;
                StmtKind::Emit { event, args }
            }
            _ if self.is_type_start() => {
                let kind = self.var_decl_stmt()?;
                self.expect_punct(";")?;
                kind
            }
            _ => {
                let kind = self.simple_stmt()?;
                self.expect_punct(";")?;
                kind
            }
        };
        Ok(Statement {
            kind,
            loc: start.to(self.prev_loc()),
        })
    }

    fn for_stmt(&mut self) -> PResult<StmtKind> {
        self.bump();
        self.expect_punct("(")?;
        let init = if self.eat_punct(";") {
            None
        } else {
            let s = self.peek().loc;
            let kind = if self.is_type_start() {
                self.var_decl_stmt()?
            } else {
                self.simple_stmt()?
            };
            self.expect_punct(";")?;
            Some(Box::new(Statement {
                kind,
                loc: s.to(self.prev_loc()),
            }))
        };
        let cond = if self.is_punct(";") {
            None
        } else {
            Some(self.expr()?)
        };
        self.expect_punct(";")?;
        let update = if self.is_punct(")") {
            None
        } else {
            let s = self.peek().loc;
            let kind = if self.is_punct("++") || self.is_punct("--") {
                self.prefix_update()?
            } else {
                self.simple_stmt()?
            };
            Some(Box::new(Statement {
                kind,
                loc: s.to(self.prev_loc()),
            }))
        };
        self.expect_punct(")")?;
        let body = self.body()?;
        Ok(StmtKind::For {
            init,
            cond,
            update,
            body,
        })
    }

    fn require_stmt(&mut self) -> PResult<StmtKind> {
        self.bump();
        self.expect_punct("(")?;
        if let Some(mut call) = self.try_external_call()? {
            if self.eat_punct(",") {
                self.opt_string()?;
            }
            self.expect_punct(")")?;
            self.expect_punct(";")?;
            if call.kind == CallKind::Transfer {
                return Err(self.unsupported("`transfer` used as a value"));
            }
            call.result = CallResultUse::Required;
            return Ok(StmtKind::ExternalCall(call));
        }
        let cond = self.expr()?;
        let message = if self.eat_punct(",") {
            self.opt_string()?
        } else {
            None
        };
        self.expect_punct(")")?;
        self.expect_punct(";")?;
        Ok(StmtKind::Require { cond, message })
    }

    fn opt_string(&mut self) -> PResult<Option<String>> {
        if let Tok::Str(s) = &self.peek().tok {
            let s = s.clone();
            self.bump();
            Ok(Some(s))
        } else {
            Ok(None)
        }
    }

    fn var_decl_stmt(&mut self) -> PResult<StmtKind> {
        let tloc = self.peek().loc;
        let ty = self.type_name()?;
        if matches!(ty, TypeName::Mapping { .. }) {
            return Err(self.unsupported("local mappings"));
        }
        if self.is_word("memory") || self.is_word("storage") {
            self.bump();
        }
        let (name, nloc) = self.ident()?;
        let decl = VarDecl {
            name: name.clone(),
            ty,
            loc: tloc.to(nloc),
        };
        if !self.eat_punct("=") {
            return Ok(StmtKind::VarDecl { decl, init: None });
        }
        if let Some(mut call) = self.try_external_call()? {
            if ty != TypeName::Scalar(ScalarType::Bool) || call.kind == CallKind::Transfer {
                return Err(self.error("boolean result of `send` or `call`"));
            }
            call.result = CallResultUse::Bound {
                name,
                declared: true,
            };
            return Ok(StmtKind::ExternalCall(call));
        }
        let init = self.expr()?;
        Ok(StmtKind::VarDecl {
            decl,
            init: Some(init),
        })
    }

    /// `(bool ok, ) = target.call{..}(..);` with any trailing tuple members
    /// ignored. Restores the position if the statement has another shape.
    fn try_tuple_call(&mut self) -> PResult<Option<StmtKind>> {
        let shape = matches!(self.peek_at(1), Tok::Ident(w) if w == "bool")
            && matches!(self.peek_at(2), Tok::Ident(_))
            && matches!(self.peek_at(3), Tok::Punct(","));
        if !self.is_punct("(") || !shape {
            return Ok(None);
        }
        let saved = self.pos;
        self.bump();
        self.bump();
        let (name, _) = self.ident()?;
        while !self.is_punct(")") && !self.at_eof() {
            self.bump();
        }
        self.expect_punct(")")?;
        if !self.eat_punct("=") {
            self.pos = saved;
            return Ok(None);
        }
        let Some(mut call) = self.try_external_call()? else {
            self.pos = saved;
            return Ok(None);
        };
        if call.kind == CallKind::Transfer {
            return Err(self.error("boolean result of `send` or `call`"));
        }
        call.result = CallResultUse::Bound {
            name,
            declared: true,
        };
        self.expect_punct(";")?;
        Ok(Some(StmtKind::ExternalCall(call)))
    }

    fn prefix_update(&mut self) -> PResult<StmtKind> {
        let op_tok = self.bump();
        let op = if matches!(op_tok.tok, Tok::Punct("++")) {
            BinOp::Add
        } else {
            BinOp::Sub
        };
        let target = self.postfix()?;
        self.check_lvalue(&target)?;
        Ok(update_assign(target, op, op_tok.loc))
    }

    /// Assignment, `x++`, internal call, or bare external call.
    fn simple_stmt(&mut self) -> PResult<StmtKind> {
        if let Some(call) = self.try_external_call()? {
            return Ok(StmtKind::ExternalCall(call));
        }
        let target = self.expr()?;
        if self.is_punct("++") || self.is_punct("--") {
            let op_tok = self.bump();
            self.check_lvalue(&target)?;
            let op = if matches!(op_tok.tok, Tok::Punct("++")) {
                BinOp::Add
            } else {
                BinOp::Sub
            };
            return Ok(update_assign(target, op, op_tok.loc));
        }
        let compound = match &self.peek().tok {
            Tok::Punct("=") => None,
            Tok::Punct("+=") => Some(BinOp::Add),
            Tok::Punct("-=") => Some(BinOp::Sub),
            Tok::Punct("*=") => Some(BinOp::Mul),
            Tok::Punct("/=") => Some(BinOp::Div),
            Tok::Punct("%=") => Some(BinOp::Mod),
            _ => {
                if matches!(target.kind, ExprKind::Call { .. }) {
                    return Ok(StmtKind::Expr(target));
                }
                return Err(self.error("`=`"));
            }
        };
        self.check_lvalue(&target)?;
        self.bump();
        if compound.is_none() {
            if let Some(mut call) = self.try_external_call()? {
                let ExprKind::Ident(name) = &target.kind else {
                    return Err(self.unsupported("storing a call result outside a local variable"));
                };
                if call.kind == CallKind::Transfer {
                    return Err(self.unsupported("`transfer` used as a value"));
                }
                call.result = CallResultUse::Bound {
                    name: name.clone(),
                    declared: false,
                };
                return Ok(StmtKind::ExternalCall(call));
            }
        }
        let rhs = self.expr()?;
        let value = match compound {
            None => rhs,
            Some(op) => {
                let loc = target.loc.to(rhs.loc);
                Expression::new(
                    ExprKind::Binary {
                        op,
                        lhs: Box::new(target.clone()),
                        rhs: Box::new(rhs),
                    },
                    loc,
                )
            }
        };
        Ok(StmtKind::Assign { target, value })
    }

    fn check_lvalue(&self, e: &Expression) -> PResult<()> {
        match &e.kind {
            ExprKind::Ident(_) => Ok(()),
            ExprKind::Index { base, .. } if matches!(base.kind, ExprKind::Ident(_)) => Ok(()),
            _ => Err(FrontendError::Syntax {
                path: self.path.to_string(),
                line: e.loc.line,
                column: e.loc.column,
                expected: "assignable expression".to_string(),
                found: "expression".to_string(),
            }),
        }
    }

    /// Parses `target.transfer(v)`, `target.send(v)`, `target.call.value(v)(..)`,
    /// `target.call{value: v}(..)` or `target.call(..)` if one starts here;
    /// otherwise restores the position and returns `None`.
    fn try_external_call(&mut self) -> PResult<Option<ExternalCall>> {
        let saved = self.pos;
        let target = match self.postfix() {
            Ok(t) => t,
            Err(_) => {
                self.pos = saved;
                return Ok(None);
            }
        };
        let member = match (self.peek_at(0), self.peek_at(1)) {
            (Tok::Punct("."), Tok::Ident(m))
                if matches!(m.as_str(), "transfer" | "send" | "call") =>
            {
                m.clone()
            }
            _ => {
                self.pos = saved;
                return Ok(None);
            }
        };
        self.bump();
        self.bump();
        let call = match member.as_str() {
            "transfer" | "send" => {
                self.expect_punct("(")?;
                let v = self.expr()?;
                self.expect_punct(")")?;
                let kind = if member == "transfer" {
                    CallKind::Transfer
                } else {
                    CallKind::Send
                };
                ExternalCall {
                    kind,
                    target,
                    value: Some(v),
                    result: CallResultUse::Ignored,
                }
            }
            _ => {
                let mut value = None;
                if self.eat_punct(".") {
                    self.expect_word("value")?;
                    self.expect_punct("(")?;
                    value = Some(self.expr()?);
                    self.expect_punct(")")?;
                } else if self.eat_punct("{") {
                    loop {
                        let (opt, _) = self.ident()?;
                        self.expect_punct(":")?;
                        let e = self.expr()?;
                        match opt.as_str() {
                            "value" => value = Some(e),
                            "gas" => {}
                            _ => return Err(self.unsupported(&format!("call option `{opt}`"))),
                        }
                        if !self.eat_punct(",") {
                            break;
                        }
                    }
                    self.expect_punct("}")?;
                }
                // calldata is not modeled
                self.call_args()?;
                ExternalCall {
                    kind: CallKind::Call,
                    target,
                    value,
                    result: CallResultUse::Ignored,
                }
            }
        };
        Ok(Some(call))
    }

    // ---- expressions ----

    pub(crate) fn expr(&mut self) -> PResult<Expression> {
        self.binary(0)
    }

    fn binary(&mut self, level: usize) -> PResult<Expression> {
        const LEVELS: &[&[(&str, BinOp)]] = &[
            &[("||", BinOp::Or)],
            &[("&&", BinOp::And)],
            &[("==", BinOp::Eq), ("!=", BinOp::Ne)],
            &[
                ("<", BinOp::Lt),
                ("<=", BinOp::Le),
                (">", BinOp::Gt),
                (">=", BinOp::Ge),
            ],
            &[("+", BinOp::Add), ("-", BinOp::Sub)],
            &[("*", BinOp::Mul), ("/", BinOp::Div), ("%", BinOp::Mod)],
        ];
        if level == LEVELS.len() {
            return self.unary();
        }
        let mut lhs = self.binary(level + 1)?;
        loop {
            let op = match &self.peek().tok {
                Tok::Punct(p) => LEVELS[level]
                    .iter()
                    .find(|(s, _)| s == p)
                    .map(|(_, op)| *op),
                _ => None,
            };
            let Some(op) = op else { break };
            self.bump();
            let rhs = self.binary(level + 1)?;
            let loc = lhs.loc.to(rhs.loc);
            lhs = Expression::new(
                ExprKind::Binary {
                    op,
                    lhs: Box::new(lhs),
                    rhs: Box::new(rhs),
                },
                loc,
            );
        }
        if let Tok::Punct(p @ ("&" | "|" | "^" | "~" | "?")) = self.peek().tok {
            return Err(self.unsupported(&format!("operator `{p}`")));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expression> {
        let start = self.peek().loc;
        let op = if self.eat_punct("!") {
            UnOp::Not
        } else if self.eat_punct("-") {
            UnOp::Neg
        } else {
            return self.postfix();
        };
        let operand = self.unary()?;
        let loc = start.to(operand.loc);
        Ok(Expression::new(
            ExprKind::Unary {
                op,
                operand: Box::new(operand),
            },
            loc,
        ))
    }

    fn postfix(&mut self) -> PResult<Expression> {
        let mut e = self.primary()?;
        while self.is_punct("[") {
            self.bump();
            let key = self.expr()?;
            self.expect_punct("]")?;
            let loc = e.loc.to(self.prev_loc());
            e = Expression::new(
                ExprKind::Index {
                    base: Box::new(e),
                    key: Box::new(key),
                },
                loc,
            );
        }
        if self.is_punct(".") {
            if let Tok::Ident(m) = self.peek_at(1) {
                if !matches!(m.as_str(), "transfer" | "send" | "call") {
                    return Err(self.unsupported(&format!("member access `.{m}`")));
                }
            }
        }
        Ok(e)
    }

    fn primary(&mut self) -> PResult<Expression> {
        let t = self.peek().clone();
        match &t.tok {
            Tok::Number(n) => {
                self.bump();
                let mut value = n.clone();
                let mut loc = t.loc;
                if let Some(mult) = self.peek_ident().and_then(unit_multiplier) {
                    value *= mult;
                    loc = loc.to(self.bump().loc);
                }
                Ok(Expression::new(ExprKind::Literal(value), loc))
            }
            Tok::Punct("(") => {
                self.bump();
                let e = self.expr()?;
                if self.is_punct(",") {
                    return Err(self.unsupported("tuples"));
                }
                self.expect_punct(")")?;
                Ok(e)
            }
            Tok::Ident(word) => self.ident_primary(word.clone(), t.loc),
            _ => Err(self.error("expression")),
        }
    }

    fn ident_primary(&mut self, word: String, loc: SourceLocation) -> PResult<Expression> {
        match word.as_str() {
            "true" | "false" => {
                self.bump();
                Ok(Expression::new(ExprKind::Bool(word == "true"), loc))
            }
            "now" => {
                self.bump();
                Ok(Expression::new(ExprKind::Env(EnvMember::Timestamp), loc))
            }
            "block" | "msg" | "tx" => {
                self.bump();
                self.expect_punct(".")?;
                let (member, mloc) = self.ident()?;
                let env = match (word.as_str(), member.as_str()) {
                    ("block", "timestamp") => EnvMember::Timestamp,
                    ("msg", "sender") => EnvMember::Sender,
                    ("msg", "value") => EnvMember::Value,
                    _ => return Err(self.unsupported_at(loc, &format!("`{word}.{member}`"))),
                };
                Ok(Expression::new(ExprKind::Env(env), loc.to(mloc)))
            }
            "this" => {
                self.bump();
                self.this_balance(loc)
            }
            "address" | "payable" => {
                self.bump();
                self.expect_punct("(")?;
                if self.is_word("this") && word == "address" {
                    self.bump();
                    self.expect_punct(")")?;
                    return self.this_balance(loc);
                }
                // address(x) / payable(x) are identity conversions here
                let inner = self.expr()?;
                self.expect_punct(")")?;
                Ok(inner)
            }
            w if UNSUPPORTED_BUILTINS.contains(&w) => {
                Err(self.unsupported(&format!("builtin `{w}`")))
            }
            w if parse_int_type(w).is_some() || w == "bool" => {
                Err(self.unsupported(&format!("type conversion `{w}(..)`")))
            }
            _ => {
                self.bump();
                if self.is_punct("(") {
                    let args = self.call_args()?;
                    return Ok(Expression::new(
                        ExprKind::Call { callee: word, args },
                        loc.to(self.prev_loc()),
                    ));
                }
                Ok(Expression::new(ExprKind::Ident(word), loc))
            }
        }
    }

    fn this_balance(&mut self, loc: SourceLocation) -> PResult<Expression> {
        self.expect_punct(".")?;
        let (member, mloc) = self.ident()?;
        if member != "balance" {
            return Err(self.unsupported_at(loc, &format!("`this.{member}`")));
        }
        Ok(Expression::new(
            ExprKind::Env(EnvMember::SelfBalance),
            loc.to(mloc),
        ))
    }

    fn unsupported_at(&self, loc: SourceLocation, feature: &str) -> FrontendError {
        FrontendError::Unsupported {
            path: self.path.to_string(),
            line: loc.line,
            column: loc.column,
            feature: feature.to_string(),
        }
    }

    fn call_args(&mut self) -> PResult<Vec<Expression>> {
        self.expect_punct("(")?;
        let mut args = Vec::new();
        if !self.is_punct(")") {
            loop {
                if let Tok::Str(_) = self.peek().tok {
                    // string arguments only occur as calldata / messages
                    self.bump();
                } else {
                    args.push(self.expr()?);
                }
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        Ok(args)
    }
}

fn update_assign(target: Expression, op: BinOp, op_loc: SourceLocation) -> StmtKind {
    let one = Expression::new(ExprKind::Literal(BigInt::from(1)), op_loc);
    let loc = target.loc.to(op_loc);
    let value = Expression::new(
        ExprKind::Binary {
            op,
            lhs: Box::new(target.clone()),
            rhs: Box::new(one),
        },
        loc,
    );
    StmtKind::Assign { target, value }
}

/// `Some(Ok(ty))` for supported integer types, `Some(Err)` for integer types
/// of unsupported width, `None` if the word is not an integer type.
fn parse_int_type(w: &str) -> Option<Result<ScalarType, ()>> {
    let (signed, digits) = if let Some(d) = w.strip_prefix("uint") {
        (false, d)
    } else {
        (true, w.strip_prefix("int")?)
    };
    let width: u16 = if digits.is_empty() {
        256
    } else if digits.chars().all(|c| c.is_ascii_digit()) {
        digits.parse().ok()?
    } else {
        return None;
    };
    if ![8, 16, 32, 64, 128, 256].contains(&width) {
        return Some(Err(()));
    }
    Some(Ok(if signed {
        ScalarType::Int(width)
    } else {
        ScalarType::Uint(width)
    }))
}

fn unit_multiplier(word: &str) -> Option<BigInt> {
    let m: u64 = match word {
        "wei" | "seconds" => 1,
        "gwei" => 1_000_000_000,
        "ether" => 1_000_000_000_000_000_000,
        "minutes" => 60,
        "hours" => 3_600,
        "days" => 86_400,
        "weeks" => 604_800,
        _ => return None,
    };
    Some(BigInt::from(m))
}
