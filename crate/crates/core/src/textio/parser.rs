//! Recursive-descent parser over raw bytes. Total: every input yields a
//! program or at least one located error, never a panic.

use std::collections::{HashMap, HashSet};
use std::path::PathBuf;

use super::{ParseError, SourceSpan};
use crate::ir::{
    func_results_attr, segments_attr, verify, Attr, DenseData, Dim, MemRefType, MemorySpace,
    OpKind, Operation, Program, Region, ScalarType, Type, ValueId, SEGMENTS_ATTR,
};

const MAX_DEPTH: usize = 128;

#[derive(Debug, Clone, Default)]
pub struct ParseOptions {
    /// Directory that `@file("...")` sidecar paths are resolved against.
    pub base_dir: Option<PathBuf>,
}

pub fn parse(text: &str) -> Result<Program, Vec<ParseError>> {
    parse_with(text, &ParseOptions::default())
}

pub fn parse_with(text: &str, options: &ParseOptions) -> Result<Program, Vec<ParseError>> {
    let mut p = Parser::new(text, options);
    if let Err(e) = p.program() {
        return Err(vec![e]);
    }
    let program = p.prog;
    let diags = verify(&program);
    if diags.is_empty() {
        return Ok(program);
    }
    Err(diags
        .into_iter()
        .map(|d| ParseError {
            span: d.span.unwrap_or_default(),
            message: d.message,
            expected: None,
        })
        .collect())
}

type PResult<T> = Result<T, ParseError>;

enum Number {
    Int(i64),
    Float(f64),
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    line_starts: Vec<usize>,
    options: &'a ParseOptions,
    prog: Program,
    scopes: Vec<HashMap<String, ValueId>>,
    func_names: HashSet<String>,
    depth: usize,
}

fn is_ident_start(c: u8) -> bool {
    c.is_ascii_alphabetic() || c == b'_'
}

fn is_ident_char(c: u8) -> bool {
    c.is_ascii_alphanumeric() || c == b'_' || c == b'.' || c == b'$'
}

impl<'a> Parser<'a> {
    fn new(text: &'a str, options: &'a ParseOptions) -> Self {
        let src = text.as_bytes();
        let mut line_starts = vec![0];
        line_starts.extend(
            src.iter()
                .enumerate()
                .filter(|(_, &c)| c == b'\n')
                .map(|(i, _)| i + 1),
        );
        Parser {
            src,
            pos: 0,
            line_starts,
            options,
            prog: Program::default(),
            scopes: Vec::new(),
            func_names: HashSet::new(),
            depth: 0,
        }
    }

    fn span(&self, start: usize, end: usize) -> SourceSpan {
        let line = self.line_starts.partition_point(|&s| s <= start);
        let col_start = self.line_starts[line - 1];
        let column = String::from_utf8_lossy(&self.src[col_start..start.min(self.src.len())])
            .chars()
            .count()
            + 1;
        SourceSpan {
            start,
            end: end.max(start),
            line,
            column,
        }
    }

    fn error_at(&self, start: usize, message: impl Into<String>) -> ParseError {
        ParseError {
            span: self.span(start, start),
            message: message.into(),
            expected: None,
        }
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        self.error_at(self.pos, message)
    }

    fn expected(&self, what: &str) -> ParseError {
        let found = match self.src.get(self.pos) {
            None => "end of input".to_string(),
            Some(_) => {
                let end = (self.pos + 12).min(self.src.len());
                let snippet = String::from_utf8_lossy(&self.src[self.pos..end]);
                format!("`{}`", snippet.split_whitespace().next().unwrap_or(""))
            }
        };
        ParseError {
            span: self.span(self.pos, self.pos),
            message: format!("unexpected {found}"),
            expected: Some(what.to_string()),
        }
    }

    // ----- lexing -----

    fn skip_ws(&mut self) {
        while let Some(&c) = self.src.get(self.pos) {
            if c.is_ascii_whitespace() {
                self.pos += 1;
            } else if c == b'/' && self.src.get(self.pos + 1) == Some(&b'/') {
                while self.src.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn at(&mut self, tok: &str) -> bool {
        self.skip_ws();
        self.src[self.pos..].starts_with(tok.as_bytes())
    }

    fn eat(&mut self, tok: &str) -> bool {
        if self.at(tok) {
            self.pos += tok.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: &str) -> PResult<()> {
        if self.eat(tok) {
            Ok(())
        } else {
            Err(self.expected(&format!("`{tok}`")))
        }
    }

    /// Keyword match with an identifier boundary after it.
    fn eat_kw(&mut self, word: &str) -> bool {
        if !self.at(word) {
            return false;
        }
        let after = self.src.get(self.pos + word.len()).copied();
        if after.is_some_and(is_ident_char) {
            return false;
        }
        self.pos += word.len();
        true
    }

    fn ident(&mut self) -> PResult<String> {
        self.skip_ws();
        let start = self.pos;
        if !self.src.get(self.pos).copied().is_some_and(is_ident_start) {
            return Err(self.expected("identifier"));
        }
        while self.src.get(self.pos).copied().is_some_and(is_ident_char) {
            self.pos += 1;
        }
        Ok(String::from_utf8_lossy(&self.src[start..self.pos]).into_owned())
    }

    fn value_name(&mut self) -> PResult<String> {
        self.skip_ws();
        let start = self.pos;
        if self.src.get(self.pos) != Some(&b'%') {
            return Err(self.expected("SSA value `%name`"));
        }
        self.pos += 1;
        while self.src.get(self.pos).copied().is_some_and(is_ident_char) {
            self.pos += 1;
        }
        if self.pos == start + 1 {
            return Err(self.error_at(start, "empty SSA value name"));
        }
        Ok(String::from_utf8_lossy(&self.src[start..self.pos]).into_owned())
    }

    fn symbol(&mut self) -> PResult<String> {
        self.expect("@")?;
        if self.src.get(self.pos) == Some(&b'"') {
            return self.string();
        }
        let start = self.pos;
        while self.src.get(self.pos).copied().is_some_and(is_ident_char) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.expected("symbol name"));
        }
        Ok(String::from_utf8_lossy(&self.src[start..self.pos]).into_owned())
    }

    fn string(&mut self) -> PResult<String> {
        self.skip_ws();
        let start = self.pos;
        if self.src.get(self.pos) != Some(&b'"') {
            return Err(self.expected("string literal"));
        }
        self.pos += 1;
        let mut bytes = Vec::new();
        loop {
            match self.src.get(self.pos).copied() {
                None => return Err(self.error_at(start, "unterminated string literal")),
                Some(b'"') => {
                    self.pos += 1;
                    break;
                }
                Some(b'\\') => {
                    let esc = self.src.get(self.pos + 1).copied();
                    bytes.push(match esc {
                        Some(b'n') => b'\n',
                        Some(b't') => b'\t',
                        Some(b'"') => b'"',
                        Some(b'\\') => b'\\',
                        _ => return Err(self.error("invalid escape in string literal")),
                    });
                    self.pos += 2;
                }
                Some(c) => {
                    bytes.push(c);
                    self.pos += 1;
                }
            }
        }
        String::from_utf8(bytes).map_err(|_| self.error_at(start, "string literal is not UTF-8"))
    }

    fn number(&mut self) -> PResult<Number> {
        self.skip_ws();
        let start = self.pos;
        let neg = self.src.get(self.pos) == Some(&b'-');
        if neg {
            self.pos += 1;
        }
        if self.eat_kw("inf") {
            return Ok(Number::Float(if neg {
                f64::NEG_INFINITY
            } else {
                f64::INFINITY
            }));
        }
        if !neg && self.eat_kw("nan") {
            return Ok(Number::Float(f64::NAN));
        }
        let digits = |p: &mut Self| {
            let s = p.pos;
            while p.src.get(p.pos).is_some_and(u8::is_ascii_digit) {
                p.pos += 1;
            }
            p.pos > s
        };
        if !digits(self) {
            self.pos = start;
            return Err(self.expected("number"));
        }
        let mut float = false;
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            float = true;
            digits(self);
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if digits(self) {
                float = true;
            } else {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        if float {
            text.parse::<f64>()
                .map(Number::Float)
                .map_err(|_| self.error_at(start, format!("invalid float literal `{text}`")))
        } else {
            text.parse::<i64>()
                .map(Number::Int)
                .map_err(|_| self.error_at(start, format!("integer literal `{text}` out of range")))
        }
    }

    // ----- types -----

    fn scalar_type(&mut self) -> PResult<ScalarType> {
        let start = self.pos;
        let word = self.ident()?;
        ScalarType::from_keyword(&word)
            .ok_or_else(|| self.error_at(start, format!("unknown element type `{word}`")))
    }

    fn ty(&mut self) -> PResult<Type> {
        self.skip_ws();
        if self.eat("!kokkos.team") {
            return Ok(Type::Team);
        }
        if self.eat("memref<") {
            let mut shape = Vec::new();
            loop {
                self.skip_ws();
                match self.src.get(self.pos) {
                    Some(b'?') => {
                        self.pos += 1;
                        shape.push(Dim::Dynamic);
                    }
                    Some(c) if c.is_ascii_digit() => {
                        let start = self.pos;
                        while self.src.get(self.pos).is_some_and(u8::is_ascii_digit) {
                            self.pos += 1;
                        }
                        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
                        let n = text
                            .parse::<u64>()
                            .map_err(|_| self.error_at(start, "dimension out of range"))?;
                        shape.push(Dim::Static(n));
                    }
                    _ => break,
                }
                if self.src.get(self.pos) != Some(&b'x') {
                    return Err(self.expected("`x` after dimension"));
                }
                self.pos += 1;
            }
            let element = self.scalar_type()?;
            let mut space = MemorySpace::Unassigned;
            if self.eat(",") {
                let start = self.pos;
                let word = self.ident()?;
                space = MemorySpace::from_keyword(&word).ok_or_else(|| {
                    self.error_at(start, format!("unknown memory space `{word}`"))
                })?;
            }
            self.expect(">")?;
            return Ok(Type::MemRef(MemRefType {
                element,
                shape,
                space,
            }));
        }
        if self.peek().is_some_and(is_ident_start) {
            return Ok(Type::Scalar(self.scalar_type()?));
        }
        Err(self.expected("type"))
    }

    /// `T` or `(T, U, ...)`.
    fn type_list(&mut self) -> PResult<Vec<Type>> {
        if self.eat("(") {
            let mut out = Vec::new();
            if self.eat(")") {
                return Ok(out);
            }
            loop {
                out.push(self.ty()?);
                if self.eat(")") {
                    return Ok(out);
                }
                self.expect(",")?;
            }
        }
        Ok(vec![self.ty()?])
    }

    fn opt_types(&mut self) -> PResult<Vec<Type>> {
        if self.eat(":") {
            self.type_list()
        } else {
            Ok(Vec::new())
        }
    }

    // ----- attributes -----

    /// True if the upcoming `{` opens an attribute dictionary, not a region.
    fn at_attr_dict(&mut self) -> bool {
        if !self.at("{") {
            return false;
        }
        let save = self.pos;
        self.pos += 1;
        let result = if self.peek() == Some(b'}') {
            true
        } else if self.peek().is_some_and(is_ident_start) {
            let _ = self.ident();
            self.peek() == Some(b'=')
        } else {
            false
        };
        self.pos = save;
        result
    }

    fn opt_attr_dict(&mut self, op: &mut Operation) -> PResult<()> {
        if !self.at_attr_dict() {
            return Ok(());
        }
        self.expect("{")?;
        if self.eat("}") {
            return Ok(());
        }
        loop {
            let start = self.pos;
            let key = self.ident()?;
            self.expect("=")?;
            let value = self.attr_value(0)?;
            if op.attrs.insert(key.clone(), value).is_some() {
                return Err(self.error_at(start, format!("duplicate attribute `{key}`")));
            }
            if self.eat("}") {
                return Ok(());
            }
            self.expect(",")?;
        }
    }

    fn attr_value(&mut self, depth: usize) -> PResult<Attr> {
        if depth > MAX_DEPTH {
            return Err(self.error("attribute nesting too deep"));
        }
        match self.peek() {
            Some(b'[') => {
                self.pos += 1;
                let mut items = Vec::new();
                if self.eat("]") {
                    return Ok(Attr::Array(items));
                }
                loop {
                    items.push(self.attr_value(depth + 1)?);
                    if self.eat("]") {
                        return Ok(Attr::Array(items));
                    }
                    self.expect(",")?;
                }
            }
            Some(b'"') => Ok(Attr::Str(self.string()?)),
            Some(b'@') => Ok(Attr::Symbol(self.symbol()?)),
            Some(b'!') => Ok(Attr::Type(self.ty()?)),
            Some(c) if c.is_ascii_digit() || c == b'-' => Ok(match self.number()? {
                Number::Int(v) => Attr::Int(v),
                Number::Float(v) => Attr::Float(v),
            }),
            Some(c) if is_ident_start(c) => {
                if self.at("memref<") {
                    return Ok(Attr::Type(self.ty()?));
                }
                if self.eat("dense<") {
                    let data = self.dense_elements(None)?;
                    return Ok(Attr::Dense { data, file: None });
                }
                let save = self.pos;
                let word = self.ident()?;
                if ScalarType::from_keyword(&word).is_some() {
                    self.pos = save;
                    return Ok(Attr::Type(self.ty()?));
                }
                match word.as_str() {
                    "inf" => Ok(Attr::Float(f64::INFINITY)),
                    "nan" => Ok(Attr::Float(f64::NAN)),
                    _ => Ok(Attr::Ident(word)),
                }
            }
            _ => Err(self.expected("attribute value")),
        }
    }

    /// Elements after `dense<`, through the closing `>`. With an element
    /// type, the payload kind follows it; otherwise it is inferred.
    fn dense_elements(&mut self, element: Option<ScalarType>) -> PResult<DenseData> {
        let start = self.pos;
        let mut nums = Vec::new();
        self.expect("[")?;
        let mut open = 1usize;
        while open > 0 {
            if self.eat("[") {
                open += 1;
                if open > MAX_DEPTH {
                    return Err(self.error("dense literal nesting too deep"));
                }
            } else if self.eat("]") {
                open -= 1;
            } else if self.eat(",") {
            } else {
                nums.push(self.number()?);
            }
        }
        self.expect(">")?;
        let want_float = match element {
            Some(e) => e.is_float(),
            None => nums.iter().any(|n| matches!(n, Number::Float(_))),
        };
        if want_float {
            Ok(DenseData::Float(
                nums.into_iter()
                    .map(|n| match n {
                        Number::Int(v) => v as f64,
                        Number::Float(v) => v,
                    })
                    .collect(),
            ))
        } else {
            nums.into_iter()
                .map(|n| match n {
                    Number::Int(v) => Ok(v),
                    Number::Float(_) => {
                        Err(self.error_at(start, "float element in integer dense literal"))
                    }
                })
                .collect::<PResult<Vec<_>>>()
                .map(DenseData::Int)
        }
    }

    // ----- SSA scopes -----

    fn lookup(&self, name: &str, at: usize) -> PResult<ValueId> {
        self.scopes
            .iter()
            .rev()
            .find_map(|s| s.get(name).copied())
            .ok_or_else(|| self.error_at(at, format!("use before definition of {name}")))
    }

    fn use_value(&mut self) -> PResult<ValueId> {
        self.skip_ws();
        let at = self.pos;
        let name = self.value_name()?;
        self.lookup(&name, at)
    }

    fn define(&mut self, name: &str, ty: Type, at: usize) -> PResult<ValueId> {
        if !self.func_names.insert(name.to_string()) {
            return Err(self.error_at(at, format!("duplicate SSA name {name}")));
        }
        let v = self.prog.values.new_value(ty);
        if let Some(scope) = self.scopes.last_mut() {
            scope.insert(name.to_string(), v);
        }
        Ok(v)
    }

    /// `%a, %b, ...` up to (not including) the closing token.
    fn use_list(&mut self, close: &str) -> PResult<Vec<ValueId>> {
        let mut out = Vec::new();
        if self.eat(close) {
            return Ok(out);
        }
        loop {
            out.push(self.use_value()?);
            if self.eat(close) {
                return Ok(out);
            }
            self.expect(",")?;
        }
    }

    fn name_list(&mut self, close: &str) -> PResult<Vec<String>> {
        let mut out = Vec::new();
        if self.eat(close) {
            return Ok(out);
        }
        loop {
            out.push(self.value_name()?);
            if self.eat(close) {
                return Ok(out);
            }
            self.expect(",")?;
        }
    }

    // ----- structure -----

    fn program(&mut self) -> PResult<()> {
        loop {
            self.skip_ws();
            if self.pos >= self.src.len() {
                return Ok(());
            }
            let start = self.pos;
            let word = self.ident()?;
            match word.as_str() {
                "func" | "func.func" => self.func(start)?,
                "memref.global" => self.global(start)?,
                _ => {
                    return Err(ParseError {
                        span: self.span(start, self.pos),
                        message: format!("unexpected top-level `{word}`"),
                        expected: Some("`func` or `memref.global`".into()),
                    })
                }
            }
        }
    }

    fn func(&mut self, start: usize) -> PResult<()> {
        let name = self.symbol()?;
        self.func_names.clear();
        self.scopes = vec![HashMap::new()];
        self.expect("(")?;
        let mut params = Vec::new();
        if !self.eat(")") {
            loop {
                self.skip_ws();
                let at = self.pos;
                let pname = self.value_name()?;
                self.expect(":")?;
                let ty = self.ty()?;
                params.push(self.define(&pname, ty, at)?);
                if self.eat(")") {
                    break;
                }
                self.expect(",")?;
            }
        }
        let results = if self.eat("->") {
            self.type_list()?
        } else {
            Vec::new()
        };
        let mut op = Operation::new(OpKind::Func)
            .with_attr("sym_name", Attr::Str(name))
            .with_attr("results", func_results_attr(&results));
        self.opt_attr_dict(&mut op)?;
        let body = self.region_body(params)?;
        op.regions.push(body);
        op.span = Some(self.span(start, self.pos));
        self.scopes.clear();
        self.prog.ops.push(op);
        Ok(())
    }

    fn global(&mut self, start: usize) -> PResult<()> {
        let name = self.symbol()?;
        self.expect(":")?;
        let ty_at = self.pos;
        let ty = self.ty()?;
        let Type::MemRef(mty) = ty.clone() else {
            return Err(self.error_at(ty_at, "memref.global type must be a memref"));
        };
        let mut op = Operation::new(OpKind::Global)
            .with_attr("sym_name", Attr::Str(name))
            .with_attr("type", Attr::Type(ty));
        if self.eat("=") {
            if self.eat("dense<") {
                let data = self.dense_elements(Some(mty.element))?;
                op.attrs
                    .insert("value".into(), Attr::Dense { data, file: None });
            } else if self.eat("@file(") {
                let at = self.pos;
                let file = self.string()?;
                self.expect(")")?;
                let data = self.load_sidecar(&file, &mty, at)?;
                op.attrs.insert(
                    "value".into(),
                    Attr::Dense {
                        data,
                        file: Some(file),
                    },
                );
            } else {
                return Err(self.expected("`dense<` or `@file(`"));
            }
        }
        self.opt_attr_dict(&mut op)?;
        op.span = Some(self.span(start, self.pos));
        self.prog.ops.push(op);
        Ok(())
    }

    fn load_sidecar(&self, file: &str, ty: &MemRefType, at: usize) -> PResult<DenseData> {
        let path = match &self.options.base_dir {
            Some(dir) => dir.join(file),
            None => PathBuf::from(file),
        };
        let bytes = std::fs::read(&path).map_err(|e| {
            self.error_at(at, format!("cannot read sidecar {}: {e}", path.display()))
        })?;
        let Some(len) = ty.static_len() else {
            return Err(self.error_at(at, "sidecar-backed global needs a static shape"));
        };
        let want = len as u128 * ty.element.byte_width() as u128;
        if bytes.len() as u128 != want {
            return Err(self.error_at(
                at,
                format!("sidecar {file} has {} bytes, expected {want}", bytes.len()),
            ));
        }
        DenseData::from_le_bytes(ty.element, &bytes)
            .ok_or_else(|| self.error_at(at, format!("sidecar {file} is malformed")))
    }

    /// `{ [^bb(%a: T, ...):] ops }` with `args` already defined by the caller
    /// (they are placed into the new scope).
    fn region_body(&mut self, args: Vec<ValueId>) -> PResult<Region> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(self.error("region nesting too deep"));
        }
        self.expect("{")?;
        let mut region = Region::new(args, Vec::new());
        if self.eat("^") {
            let _label = self.ident()?;
            self.expect("(")?;
            if !self.eat(")") {
                loop {
                    self.skip_ws();
                    let at = self.pos;
                    let name = self.value_name()?;
                    self.expect(":")?;
                    let ty = self.ty()?;
                    region.args.push(self.define(&name, ty, at)?);
                    if self.eat(")") {
                        break;
                    }
                    self.expect(",")?;
                }
            }
            self.expect(":")?;
        }
        loop {
            match self.peek() {
                None => return Err(self.expected("`}`")),
                Some(b'}') => {
                    self.pos += 1;
                    break;
                }
                Some(_) => {
                    let op = self.operation()?;
                    region.ops.push(op);
                }
            }
        }
        self.depth -= 1;
        Ok(region)
    }

    /// Region whose arguments are introduced by the op header.
    fn scoped_region(&mut self, args: &[(String, Type, usize)]) -> PResult<Region> {
        self.scopes.push(HashMap::new());
        let mut ids = Vec::new();
        for (name, ty, at) in args {
            ids.push(self.define(name, ty.clone(), *at)?);
        }
        let r = self.region_body(ids);
        self.scopes.pop();
        r
    }

    fn generic_regions(&mut self, op: &mut Operation) -> PResult<()> {
        while self.at("{") {
            let r = self.scoped_region(&[])?;
            op.regions.push(r);
        }
        Ok(())
    }

    fn operation(&mut self) -> PResult<Operation> {
        self.skip_ws();
        let start = self.pos;
        let mut result_names = Vec::new();
        if self.peek() == Some(b'%') {
            loop {
                self.skip_ws();
                result_names.push((self.pos, self.value_name()?));
                if !self.eat(",") {
                    break;
                }
            }
            self.expect("=")?;
        }
        self.skip_ws();
        let name_at = self.pos;
        let name = self.ident()?;
        let kind = OpKind::from_name(&name).ok_or_else(|| ParseError {
            span: self.span(name_at, self.pos),
            message: format!("unknown op name `{name}`"),
            expected: None,
        })?;
        if matches!(kind, OpKind::Func | OpKind::Global) {
            return Err(self.error_at(name_at, format!("{name} only allowed at top level")));
        }
        let (mut op, types) = self.op_body(kind)?;
        if types.len() != result_names.len() {
            return Err(self.error_at(
                start,
                format!(
                    "{name} declares {} result names but {} result types",
                    result_names.len(),
                    types.len()
                ),
            ));
        }
        for ((at, rname), ty) in result_names.iter().zip(types) {
            let v = self.define(rname, ty, *at)?;
            op.results.push(v);
        }
        op.span = Some(self.span(start, self.pos));
        Ok(op)
    }

    /// Parses everything after the op name. Returns the op (results not yet
    /// attached) and the declared result types.
    fn op_body(&mut self, kind: OpKind) -> PResult<(Operation, Vec<Type>)> {
        use OpKind::*;
        let mut op = Operation::new(kind);
        let next = self.peek();
        match kind {
            Constant if !matches!(next, Some(b'(' | b'{' | b':')) => {
                let at = self.pos;
                let lit = self.number()?;
                let types = self.opt_types()?;
                let value = match (lit, types.first().and_then(Type::as_scalar)) {
                    (Number::Int(v), Some(t)) if t.is_float() => Attr::Float(v as f64),
                    (Number::Int(v), _) => Attr::Int(v),
                    (Number::Float(v), Some(t)) if t.is_float() => Attr::Float(v),
                    (Number::Float(_), _) => {
                        return Err(self.error_at(at, "float literal for a non-float constant"))
                    }
                };
                op.attrs.insert("value".into(), value);
                Ok((op, types))
            }
            Load if next == Some(b'%') => {
                op.operands.push(self.use_value()?);
                self.expect("[")?;
                op.operands.extend(self.use_list("]")?);
                let types = self.opt_types()?;
                Ok((op, types))
            }
            Store if next == Some(b'%') => {
                op.operands.push(self.use_value()?);
                self.expect(",")?;
                op.operands.push(self.use_value()?);
                self.expect("[")?;
                op.operands.extend(self.use_list("]")?);
                Ok((op, Vec::new()))
            }
            Sync | Modify if next == Some(b'%') => {
                op.operands.push(self.use_value()?);
                let at = self.pos;
                let word = self.ident()?;
                if !matches!(word.as_str(), "host" | "device") {
                    return Err(self.error_at(at, format!("unknown space `{word}`")));
                }
                op.attrs.insert("space".into(), Attr::Ident(word));
                Ok((op, Vec::new()))
            }
            Call if next == Some(b'@') => {
                let callee = self.symbol()?;
                op.attrs.insert("callee".into(), Attr::Symbol(callee));
                self.expect("(")?;
                op.operands = self.use_list(")")?;
                self.opt_attr_dict(&mut op)?;
                let types = self.opt_types()?;
                Ok((op, types))
            }
            GetGlobal if next == Some(b'@') => {
                let name = self.symbol()?;
                op.attrs.insert("name".into(), Attr::Symbol(name));
                self.opt_attr_dict(&mut op)?;
                let types = self.opt_types()?;
                Ok((op, types))
            }
            If if next == Some(b'%') => {
                op.operands.push(self.use_value()?);
                self.opt_attr_dict(&mut op)?;
                let types = self.opt_types()?;
                let then = self.scoped_region(&[])?;
                op.regions.push(then);
                if self.eat_kw("else") {
                    let els = self.scoped_region(&[])?;
                    op.regions.push(els);
                } else {
                    op.regions
                        .push(Region::new(Vec::new(), vec![Operation::new(Yield)]));
                }
                Ok((op, types))
            }
            Parallel | For if next == Some(b'%') || next == Some(b'(') => self.scf_loop(op),
            RangeParallel | TeamParallel | ThreadParallel if next == Some(b'(') => {
                self.kokkos_loop(op)
            }
            _ => self.generic(op),
        }
    }

    fn generic(&mut self, mut op: Operation) -> PResult<(Operation, Vec<Type>)> {
        if self.eat("(") {
            op.operands = self.use_list(")")?;
        }
        self.opt_attr_dict(&mut op)?;
        let types = self.opt_types()?;
        self.generic_regions(&mut op)?;
        Ok((op, types))
    }

    /// One name or a parenthesized group of names (definitions).
    fn def_group(&mut self) -> PResult<(Vec<(String, usize)>, bool)> {
        if self.eat("(") {
            let mut out = Vec::new();
            loop {
                self.skip_ws();
                out.push((self.value_name()?, self.pos));
                if self.eat(")") {
                    return Ok((out, true));
                }
                self.expect(",")?;
            }
        }
        self.skip_ws();
        let at = self.pos;
        Ok((vec![(self.value_name()?, at)], false))
    }

    fn use_group(&mut self, paren: bool) -> PResult<Vec<ValueId>> {
        if paren {
            self.expect("(")?;
            self.use_list(")")
        } else {
            Ok(vec![self.use_value()?])
        }
    }

    fn scf_loop(&mut self, mut op: Operation) -> PResult<(Operation, Vec<Type>)> {
        let save = self.pos;
        let (ivs, paren) = self.def_group()?;
        if !self.at("=") {
            // Generic form: the parenthesized names were operands.
            self.pos = save;
            return self.generic(op);
        }
        self.expect("=")?;
        if op.kind == OpKind::For && (paren || ivs.len() != 1) {
            return Err(self.error_at(save, "scf.for has exactly one induction variable"));
        }
        let lo = self.use_group(paren)?;
        if !self.eat_kw("to") {
            return Err(self.expected("`to`"));
        }
        let hi = self.use_group(paren)?;
        if !self.eat_kw("step") {
            return Err(self.expected("`step`"));
        }
        let st = self.use_group(paren)?;
        if lo.len() != ivs.len() || hi.len() != ivs.len() || st.len() != ivs.len() {
            return Err(self.error_at(save, "loop bound groups must match the induction variables"));
        }
        let mut iter_names = Vec::new();
        let mut inits = Vec::new();
        if op.kind == OpKind::For && self.eat_kw("iter_args") {
            self.expect("(")?;
            loop {
                self.skip_ws();
                let at = self.pos;
                iter_names.push((self.value_name()?, at));
                self.expect("=")?;
                inits.push(self.use_value()?);
                if self.eat(")") {
                    break;
                }
                self.expect(",")?;
            }
        } else if op.kind == OpKind::Parallel && self.eat_kw("init") {
            self.expect("(")?;
            inits = self.use_list(")")?;
        }
        self.opt_attr_dict(&mut op)?;
        let types = self.opt_types()?;
        if types.len() != inits.len() {
            return Err(self.error_at(save, "loop result types must match its init values"));
        }
        let mut args: Vec<(String, Type, usize)> = ivs
            .into_iter()
            .map(|(n, at)| (n, Type::INDEX, at))
            .collect();
        for ((n, at), t) in iter_names.into_iter().zip(&types) {
            args.push((n, t.clone(), at));
        }
        op.operands = [lo, hi, st, inits].concat();
        let body = self.scoped_region(&args)?;
        op.regions.push(body);
        Ok((op, types))
    }

    fn kokkos_loop(&mut self, mut op: Operation) -> PResult<(Operation, Vec<Type>)> {
        let save = self.pos;
        self.expect("(")?;
        let names = self.name_list(")")?;
        if !self.at("->") {
            self.pos = save;
            return self.generic(op);
        }
        self.expect("->")?;
        self.expect("(")?;
        let bounds = self.use_list(")")?;
        let mut team_size = Vec::new();
        let mut vector_length = Vec::new();
        if op.kind == OpKind::TeamParallel && self.eat_kw("team_size") {
            self.expect("(")?;
            team_size.push(self.use_value()?);
            self.expect(")")?;
        }
        if op.kind != OpKind::RangeParallel && self.eat_kw("vector_length") {
            self.expect("(")?;
            vector_length.push(self.use_value()?);
            self.expect(")")?;
        }
        let mut inits = Vec::new();
        if self.eat_kw("init") {
            self.expect("(")?;
            inits = self.use_list(")")?;
        }
        self.opt_attr_dict(&mut op)?;
        let types = self.opt_types()?;
        let arg_types: Vec<Type> = match op.kind {
            OpKind::TeamParallel => vec![Type::INDEX, Type::Team],
            _ => vec![Type::INDEX; names.len()],
        };
        if names.len() != arg_types.len() || (op.kind != OpKind::RangeParallel && bounds.len() != 1)
        {
            return Err(self.error_at(
                save,
                format!("wrong number of region arguments for {}", op.kind),
            ));
        }
        if op.kind == OpKind::RangeParallel && bounds.len() != names.len() {
            return Err(self.error_at(save, "range_parallel needs one bound per index"));
        }
        match op.kind {
            OpKind::TeamParallel => {
                op.attrs.insert(
                    SEGMENTS_ATTR.into(),
                    segments_attr(&[1, team_size.len(), vector_length.len(), inits.len()]),
                );
            }
            OpKind::ThreadParallel => {
                op.attrs.insert(
                    SEGMENTS_ATTR.into(),
                    segments_attr(&[1, vector_length.len(), inits.len()]),
                );
            }
            _ => {}
        }
        let args: Vec<(String, Type, usize)> = names
            .into_iter()
            .zip(arg_types)
            .map(|(n, t)| (n, t, save))
            .collect();
        op.operands = [bounds, team_size, vector_length, inits].concat();
        let body = self.scoped_region(&args)?;
        op.regions.push(body);
        Ok((op, types))
    }
}
