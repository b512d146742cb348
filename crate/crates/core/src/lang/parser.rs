use super::ast::*;
use super::LangError;
use indexmap::IndexMap;
use num_bigint::BigInt;

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Int(BigInt),
    Ident(String),
    Assign,
    Semi,
    Colon,
    Comma,
    Dot,
    LBrace,
    RBrace,
    LParen,
    RParen,
    Plus,
    Minus,
    Star,
    Slash,
    Question,
    Bang,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    AndAnd,
    OrOr,
    Eof,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(src: &str) -> Result<Vec<Token>, LangError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let adv = |n: usize, i: &mut usize, col: &mut usize| {
            *i += n;
            *col += n;
        };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            adv(1, &mut i, &mut col);
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            col += i - start;
            out.push(Token { tok: Tok::Int(text.parse().unwrap()), line: tl, col: tc });
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            col += i - start;
            out.push(Token { tok: Tok::Ident(text), line: tl, col: tc });
            continue;
        }
        let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        let (tok, n) = match two.as_str() {
            ":=" => (Tok::Assign, 2),
            "!=" | "<>" => (Tok::Ne, 2),
            "<=" => (Tok::Le, 2),
            ">=" => (Tok::Ge, 2),
            "==" => (Tok::Eq, 2),
            "&&" => (Tok::AndAnd, 2),
            "||" => (Tok::OrOr, 2),
            _ => match c {
                ';' => (Tok::Semi, 1),
                ':' => (Tok::Colon, 1),
                ',' => (Tok::Comma, 1),
                '.' => (Tok::Dot, 1),
                '{' => (Tok::LBrace, 1),
                '}' => (Tok::RBrace, 1),
                '(' => (Tok::LParen, 1),
                ')' => (Tok::RParen, 1),
                '+' => (Tok::Plus, 1),
                '-' | '−' => (Tok::Minus, 1),
                '*' | '·' => (Tok::Star, 1),
                '/' => (Tok::Slash, 1),
                '?' => (Tok::Question, 1),
                '!' => (Tok::Bang, 1),
                '=' => (Tok::Eq, 1),
                '<' => (Tok::Lt, 1),
                '>' => (Tok::Gt, 1),
                '≤' => (Tok::Le, 1),
                '≥' => (Tok::Ge, 1),
                '≠' => (Tok::Ne, 1),
                _ => {
                    return Err(LangError::Syntax { line: tl, col: tc, msg: format!("unexpected character '{c}'") })
                }
            },
        };
        adv(n, &mut i, &mut col);
        out.push(Token { tok, line: tl, col: tc });
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}

const KEYWORDS: &[&str] = &[
    "class", "var", "int", "if", "else", "while", "skip", "read", "write", "new", "null", "mod", "and", "or", "not",
    "true", "false",
];

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    last_line: Line,
}

type PResult<T> = Result<T, LangError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> PResult<T> {
        let t = &self.toks[self.pos];
        Err(LangError::Syntax { line: t.line, col: t.col, msg: msg.into() })
    }

    fn expect(&mut self, t: Tok, what: &str) -> PResult<()> {
        if *self.peek() == t {
            self.bump();
            Ok(())
        } else {
            self.err(format!("expected {what}, found {}", describe(self.peek())))
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.bump();
                Ok(s)
            }
            t => self.err(format!("expected identifier, found {}", describe(&t))),
        }
    }

    fn ty(&mut self) -> PResult<Ty> {
        if self.eat_kw("int") {
            Ok(Ty::Int)
        } else {
            Ok(Ty::Ref(self.ident()?))
        }
    }

    fn class_decl(&mut self, classes: &mut IndexMap<String, IndexMap<String, Ty>>) -> PResult<()> {
        let name = self.ident()?;
        if classes.contains_key(&name) {
            return self.err(format!("class {name} declared twice"));
        }
        self.expect(Tok::LBrace, "'{'")?;
        let mut fields = IndexMap::new();
        while *self.peek() != Tok::RBrace {
            let f = self.ident()?;
            self.expect(Tok::Colon, "':'")?;
            let t = self.ty()?;
            self.expect(Tok::Semi, "';'")?;
            if fields.insert(f.clone(), t).is_some() {
                return self.err(format!("field {f} declared twice"));
            }
        }
        self.bump();
        classes.insert(name, fields);
        Ok(())
    }

    fn var_decl(&mut self, vars: &mut IndexMap<String, Ty>) -> PResult<()> {
        let mut names = vec![self.ident()?];
        while *self.peek() == Tok::Comma {
            self.bump();
            names.push(self.ident()?);
        }
        self.expect(Tok::Colon, "':'")?;
        let t = self.ty()?;
        self.expect(Tok::Semi, "';'")?;
        for n in names {
            if vars.insert(n.clone(), t.clone()).is_some() {
                return self.err(format!("variable {n} declared twice"));
            }
        }
        Ok(())
    }

    fn stmts_until_rbrace(&mut self) -> PResult<Vec<Stmt>> {
        let mut out = Vec::new();
        while *self.peek() != Tok::RBrace {
            if *self.peek() == Tok::Eof {
                return self.err("unexpected end of input, expected '}'");
            }
            out.push(self.stmt()?);
        }
        self.bump();
        Ok(out)
    }

    fn block(&mut self) -> PResult<Vec<Stmt>> {
        if *self.peek() == Tok::LBrace {
            self.bump();
            self.stmts_until_rbrace()
        } else {
            Ok(vec![self.stmt()?])
        }
    }

    fn label(&mut self) -> PResult<Line> {
        if let (Tok::Int(n), Tok::Colon) = (self.peek().clone(), self.peek_at(1).clone()) {
            let l: Line = match n.try_into() {
                Ok(l) => l,
                Err(_) => return self.err("line label out of range"),
            };
            if l <= self.last_line {
                return self.err(format!("line label {l} is not greater than the previous line {}", self.last_line));
            }
            self.bump();
            self.bump();
            self.last_line = l;
            Ok(l)
        } else {
            self.last_line += 1;
            Ok(self.last_line)
        }
    }

    fn var_list(&mut self) -> PResult<Vec<String>> {
        self.expect(Tok::LParen, "'('")?;
        let mut vs = vec![self.ident()?];
        while *self.peek() == Tok::Comma {
            self.bump();
            vs.push(self.ident()?);
        }
        self.expect(Tok::RParen, "')'")?;
        self.expect(Tok::Semi, "';'")?;
        Ok(vs)
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        let line = self.label()?;
        let kind = if self.eat_kw("skip") {
            self.expect(Tok::Semi, "';'")?;
            StmtKind::Skip
        } else if self.eat_kw("if") {
            self.expect(Tok::LParen, "'('")?;
            let g = self.guard()?;
            self.expect(Tok::RParen, "')'")?;
            let t = self.block()?;
            let e = if self.eat_kw("else") { self.block()? } else { Vec::new() };
            StmtKind::If(g, t, e)
        } else if self.eat_kw("while") {
            self.expect(Tok::LParen, "'('")?;
            let g = self.guard()?;
            self.expect(Tok::RParen, "')'")?;
            StmtKind::While(g, self.block()?)
        } else if self.eat_kw("read") {
            StmtKind::Read(self.var_list()?)
        } else if self.eat_kw("write") {
            StmtKind::Write(self.var_list()?)
        } else {
            let x = self.ident()?;
            if *self.peek() == Tok::Dot {
                self.bump();
                let f = self.ident()?;
                self.expect(Tok::Assign, "':='")?;
                let e = self.expr()?;
                self.expect(Tok::Semi, "';'")?;
                StmtKind::FieldAssign { var: x, field: f, expr: e }
            } else {
                self.expect(Tok::Assign, "':='")?;
                let e = self.expr()?;
                self.expect(Tok::Semi, "';'")?;
                StmtKind::Assign(x, e)
            }
        };
        Ok(Stmt::new(line, kind))
    }

    fn guard(&mut self) -> PResult<Guard> {
        let mut g = self.guard_and()?;
        while self.is_kw("or") || *self.peek() == Tok::OrOr {
            self.bump();
            let r = self.guard_and()?;
            g = Guard::Or(Box::new(g), Box::new(r));
        }
        Ok(g)
    }

    fn guard_and(&mut self) -> PResult<Guard> {
        let mut g = self.guard_not()?;
        while self.is_kw("and") || *self.peek() == Tok::AndAnd {
            self.bump();
            let r = self.guard_not()?;
            g = Guard::And(Box::new(g), Box::new(r));
        }
        Ok(g)
    }

    fn guard_not(&mut self) -> PResult<Guard> {
        if self.is_kw("not") || *self.peek() == Tok::Bang {
            self.bump();
            return Ok(Guard::Not(Box::new(self.guard_not()?)));
        }
        self.guard_atom()
    }

    fn guard_atom(&mut self) -> PResult<Guard> {
        if self.eat_kw("true") {
            return Ok(Guard::True);
        }
        if self.eat_kw("false") {
            return Ok(Guard::False);
        }
        if *self.peek() == Tok::LParen {
            // Either a parenthesised guard or a comparison whose left operand
            // starts with a parenthesis; try the guard reading first.
            let save = (self.pos, self.last_line);
            self.bump();
            if let Ok(g) = self.guard() {
                if *self.peek() == Tok::RParen {
                    self.bump();
                    if !starts_operator(self.peek()) {
                        return Ok(g);
                    }
                }
            }
            (self.pos, self.last_line) = save;
        }
        let a = self.expr()?;
        let op = match self.peek() {
            Tok::Eq => CmpOp::Eq,
            Tok::Ne => CmpOp::Ne,
            Tok::Lt => CmpOp::Lt,
            Tok::Le => CmpOp::Le,
            Tok::Gt => CmpOp::Gt,
            Tok::Ge => CmpOp::Ge,
            t => return self.err(format!("expected comparison operator, found {}", describe(t))),
        };
        self.bump();
        let b = self.expr()?;
        Ok(Guard::Cmp(op, a, b))
    }

    fn expr(&mut self) -> PResult<Expr> {
        let mut e = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => break,
            };
            self.bump();
            let r = self.term()?;
            e = Expr::bin(op, e, r);
        }
        Ok(e)
    }

    fn term(&mut self) -> PResult<Expr> {
        let mut e = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                Tok::Ident(s) if s == "mod" => BinOp::Mod,
                _ => break,
            };
            self.bump();
            let r = self.unary()?;
            e = Expr::bin(op, e, r);
        }
        Ok(e)
    }

    fn unary(&mut self) -> PResult<Expr> {
        if *self.peek() == Tok::Minus {
            self.bump();
            let e = self.unary()?;
            return Ok(match e {
                Expr::Int(v) => Expr::Int(-v),
                e => Expr::bin(BinOp::Sub, Expr::int(0), e),
            });
        }
        self.primary()
    }

    fn primary(&mut self) -> PResult<Expr> {
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(Expr::Int(v))
            }
            Tok::LParen => {
                // Conditional expression `(guard) ? e1 : e2`, else a parenthesised expression.
                let save = (self.pos, self.last_line);
                self.bump();
                if let Ok(g) = self.guard() {
                    if *self.peek() == Tok::RParen && *self.peek_at(1) == Tok::Question {
                        self.bump();
                        self.bump();
                        let a = self.expr()?;
                        self.expect(Tok::Colon, "':'")?;
                        let b = self.expr()?;
                        return Ok(Expr::Cond(Box::new(g), Box::new(a), Box::new(b)));
                    }
                }
                (self.pos, self.last_line) = save;
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(e)
            }
            Tok::Ident(s) if s == "null" => {
                self.bump();
                Ok(Expr::Null)
            }
            Tok::Ident(s) if s == "new" => {
                self.bump();
                let c = self.ident()?;
                if *self.peek() == Tok::LParen && *self.peek_at(1) == Tok::RParen {
                    self.bump();
                    self.bump();
                }
                Ok(Expr::New(c))
            }
            Tok::Ident(_) => {
                let x = self.ident()?;
                let mut fields = Vec::new();
                while *self.peek() == Tok::Dot {
                    self.bump();
                    fields.push(self.ident()?);
                }
                Ok(if fields.is_empty() { Expr::Var(x) } else { Expr::Field(x, fields) })
            }
            t => self.err(format!("expected expression, found {}", describe(&t))),
        }
    }
}

fn starts_operator(t: &Tok) -> bool {
    matches!(
        t,
        Tok::Plus | Tok::Minus | Tok::Star | Tok::Slash | Tok::Eq | Tok::Ne | Tok::Lt | Tok::Le | Tok::Gt | Tok::Ge
    ) || matches!(t, Tok::Ident(s) if s == "mod")
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Int(v) => format!("'{v}'"),
        Tok::Ident(s) => format!("'{s}'"),
        Tok::Eof => "end of input".to_string(),
        other => format!("{other:?}"),
    }
}

pub fn parse_program(src: &str) -> Result<Program, LangError> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0, last_line: 0 };
    let mut classes = IndexMap::new();
    let mut vars = IndexMap::new();
    let mut body = Vec::new();
    while *p.peek() != Tok::Eof {
        if body.is_empty() && p.eat_kw("class") {
            p.class_decl(&mut classes)?;
        } else if body.is_empty() && p.eat_kw("var") {
            p.var_decl(&mut vars)?;
        } else {
            body.push(p.stmt()?);
        }
    }
    let mut prog = Program { classes, vars, body };
    super::check::check_program(&mut prog)?;
    Ok(prog)
}
