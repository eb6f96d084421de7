use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use chrono::{DateTime, NaiveDateTime, Utc};
use roxmltree::{Document, Node};

use super::{
    Address, ElmoAttachment, ElmoDocument, ElmoError, ElmoIssuer, ElmoLearner,
    ElmoLearningOpportunity, ElmoResult, Extra, Identifier,
};
use crate::crypto::xmldsig::{ElmoXmlSignature, DSIG_NS};

pub const DEFAULT_MAX_INPUT_BYTES: usize = 10 * 1024 * 1024;
/// Maximum nesting of learning opportunities (top level counts as 1).
pub const MAX_LOS_DEPTH: usize = 8;
/// Guard for unknown subtrees copied into extras.
const MAX_EXTRA_DEPTH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParseOptions {
    pub max_input_bytes: usize,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self {
            max_input_bytes: DEFAULT_MAX_INPUT_BYTES,
        }
    }
}

pub fn parse_elmo(input: &[u8]) -> Result<ElmoDocument, ElmoError> {
    parse_elmo_with(input, ParseOptions::default())
}

pub fn parse_elmo_with(input: &[u8], opts: ParseOptions) -> Result<ElmoDocument, ElmoError> {
    if input.len() > opts.max_input_bytes {
        return Err(ElmoError::OversizeInput {
            size: input.len(),
            limit: opts.max_input_bytes,
        });
    }
    let (offset, body) = match input.strip_prefix(b"\xEF\xBB\xBF") {
        Some(rest) => (3, rest),
        None => (0, input),
    };
    let text = std::str::from_utf8(body)
        .map_err(|e| ElmoError::MalformedXml(format!("input is not UTF-8: {e}")))?;
    let xml = Document::parse(text).map_err(|e| ElmoError::MalformedXml(e.to_string()))?;
    let root = xml.root_element();
    if root.tag_name().name() != "elmo" {
        return Err(violation("", "root element must be <elmo>"));
    }
    let mut b = Builder::default();
    b.build(root, offset, input)
}

fn violation(path: &str, reason: &str) -> ElmoError {
    ElmoError::SchemaViolation {
        path: path.to_string(),
        reason: reason.to_string(),
    }
}

fn elements<'a, 'i>(node: Node<'a, 'i>) -> Vec<Node<'a, 'i>> {
    node.children().filter(|c| c.is_element()).collect()
}

fn local<'a>(node: &Node<'a, '_>) -> &'a str {
    node.tag_name().name()
}

/// Pairs children with their path segment; `[k]` is appended only when a
/// name repeats among the siblings.
fn segs<'a, 'i>(children: &[Node<'a, 'i>]) -> Vec<(Node<'a, 'i>, String)> {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for c in children {
        *counts.entry(local(c)).or_default() += 1;
    }
    let mut seen: HashMap<&str, usize> = HashMap::new();
    children
        .iter()
        .map(|c| {
            let name = local(c);
            let k = seen.entry(name).or_default();
            let seg = if counts[name] == 1 {
                name.to_string()
            } else {
                format!("{name}[{k}]")
            };
            *k += 1;
            (*c, seg)
        })
        .collect()
}

fn join(prefix: &str, seg: &str) -> String {
    if prefix.is_empty() {
        seg.to_string()
    } else {
        format!("{prefix}.{seg}")
    }
}

/// Direct text content, trimmed.
fn text_of(node: Node) -> String {
    let mut s = String::new();
    for c in node.children().filter(|c| c.is_text()) {
        s.push_str(c.text().unwrap_or(""));
    }
    s.trim().to_string()
}

fn non_empty(s: String) -> Option<String> {
    (!s.is_empty()).then_some(s)
}

#[derive(Default)]
struct Builder {
    extra_depth: usize,
}

impl Builder {
    fn attrs(&self, node: Node, prefix: &str, out: &mut Vec<Extra>, skip: &[&str]) {
        for a in node.attributes() {
            if skip.contains(&a.name()) {
                continue;
            }
            let v = a.value().trim();
            if !v.is_empty() {
                out.push(Extra {
                    path: format!("{prefix}@{}", a.name()),
                    value: v.to_string(),
                });
            }
        }
    }

    /// Copies an element without a typed field, and all of its subtree.
    fn extras(&mut self, node: Node, path: &str, out: &mut Vec<Extra>) -> Result<(), ElmoError> {
        self.extra_depth += 1;
        if self.extra_depth > MAX_EXTRA_DEPTH {
            return Err(violation(path, "element nesting too deep"));
        }
        self.attrs(node, path, out, &[]);
        let t = text_of(node);
        if !t.is_empty() {
            out.push(Extra {
                path: path.to_string(),
                value: t,
            });
        }
        for (c, seg) in segs(&elements(node)) {
            self.extras(c, &format!("{path}.{seg}"), out)?;
        }
        self.extra_depth -= 1;
        Ok(())
    }

    /// Text of a typed leaf; its attributes and child elements go to extras.
    fn typed_leaf(
        &mut self,
        node: Node,
        path: &str,
        out: &mut Vec<Extra>,
        skip: &[&str],
    ) -> Result<String, ElmoError> {
        self.attrs(node, path, out, skip);
        for (c, seg) in segs(&elements(node)) {
            self.extras(c, &format!("{path}.{seg}"), out)?;
        }
        Ok(text_of(node))
    }

    fn build(
        &mut self,
        root: Node,
        offset: usize,
        input: &[u8],
    ) -> Result<ElmoDocument, ElmoError> {
        let mut extras = Vec::new();
        self.attrs(root, "", &mut extras, &[]);
        let mut generated: Option<String> = None;
        let mut learner: Option<ElmoLearner> = None;
        let mut issuer: Option<ElmoIssuer> = None;
        let mut saw_report = false;
        let mut reports = Vec::new();
        let mut attachments = Vec::new();
        let mut signature = None;

        for (c, seg) in segs(&elements(root)) {
            let name = local(&c);
            if name == "Signature" && c.tag_name().namespace() == Some(DSIG_NS) {
                if signature.is_none() {
                    signature = Some(ElmoXmlSignature::from_node(c, offset)?);
                }
                continue;
            }
            match name {
                "generatedDate" if generated.is_none() => {
                    generated = Some(self.typed_leaf(c, "generatedDate", &mut extras, &[])?);
                }
                "learner" if learner.is_none() => {
                    learner = Some(self.learner(c)?);
                }
                "report" => {
                    saw_report = true;
                    self.attrs(c, &seg, &mut extras, &[]);
                    for (cc, cseg) in segs(&elements(c)) {
                        match local(&cc) {
                            "issuer" if issuer.is_none() => issuer = Some(self.issuer(cc)?),
                            "learningOpportunitySpecification" => {
                                let path = format!("reports[{}]", reports.len());
                                reports.push(self.los(cc, path, 0)?);
                            }
                            _ => self.extras(cc, &format!("{seg}.{cseg}"), &mut extras)?,
                        }
                    }
                }
                "attachment" => {
                    let p = format!("attachments[{}]", attachments.len());
                    attachments.push(self.attachment(c, &p)?);
                }
                _ => self.extras(c, &seg, &mut extras)?,
            }
        }

        let generated_raw = generated.ok_or_else(|| violation("generatedDate", "missing"))?;
        let generated_date = parse_timestamp(&generated_raw)
            .ok_or_else(|| violation("generatedDate", "not an ISO 8601 timestamp"))?;
        let learner = learner.ok_or_else(|| violation("learner", "missing"))?;
        if !saw_report {
            return Err(violation("report", "missing"));
        }
        let issuer = issuer.ok_or_else(|| violation("report.issuer", "missing"))?;
        if reports.is_empty() {
            return Err(violation(
                "report.learningOpportunitySpecification",
                "no learning opportunity in any report",
            ));
        }

        Ok(ElmoDocument {
            generated_date,
            generated_date_raw: generated_raw,
            learner,
            issuer,
            reports,
            attachments,
            xml_signature: signature,
            extras,
            raw_bytes: Arc::from(input),
        })
    }

    fn identifier(
        &mut self,
        node: Node,
        path: &str,
        out: &mut Vec<Extra>,
    ) -> Result<Identifier, ElmoError> {
        let value = self.typed_leaf(node, path, out, &["type"])?;
        let scheme = node
            .attribute("type")
            .map(str::trim)
            .filter(|s| !s.is_empty());
        Ok(Identifier {
            scheme: scheme.map(str::to_string),
            value,
        })
    }

    fn address(&mut self, node: Node, prefix: &str) -> Result<Address, ElmoError> {
        let mut a = Address::default();
        self.attrs(node, prefix, &mut a.extras, &[]);
        let mut seen = HashSet::new();
        for (c, seg) in segs(&elements(node)) {
            let name = local(&c);
            match name {
                "addressLine" => {
                    let p = format!("{prefix}.addressLine[{}]", a.lines.len());
                    let v = self.typed_leaf(c, &p, &mut a.extras, &[])?;
                    a.lines.push(v);
                }
                "postalCode" | "locality" | "country" if seen.insert(name) => {
                    let v =
                        non_empty(self.typed_leaf(c, &join(prefix, name), &mut a.extras, &[])?);
                    match name {
                        "postalCode" => a.postal_code = v,
                        "locality" => a.locality = v,
                        _ => a.country = v,
                    }
                }
                _ => self.extras(c, &join(prefix, &seg), &mut a.extras)?,
            }
        }
        Ok(a)
    }

    /// Shared walk over learner and issuer. `single` receives the first
    /// occurrence of each name in `singles`.
    #[allow(clippy::too_many_arguments)]
    fn party(
        &mut self,
        node: Node,
        prefix: &str,
        singles: &[&str],
        extras: &mut Vec<Extra>,
        identifiers: &mut Vec<Identifier>,
        address: &mut Option<Address>,
        single: &mut dyn FnMut(&str, Option<String>),
    ) -> Result<(), ElmoError> {
        self.attrs(node, prefix, extras, &[]);
        let mut seen = HashSet::new();
        for (c, seg) in segs(&elements(node)) {
            let name = local(&c);
            if name == "identifier" {
                let p = format!("{prefix}.identifier[{}]", identifiers.len());
                identifiers.push(self.identifier(c, &p, extras)?);
            } else if name == "currentAddress" && seen.insert(name) {
                *address = Some(self.address(c, &format!("{prefix}.currentAddress"))?);
            } else if singles.contains(&name) && seen.insert(name) {
                let v = self.typed_leaf(c, &format!("{prefix}.{name}"), extras, &[])?;
                single(name, non_empty(v));
            } else {
                self.extras(c, &format!("{prefix}.{seg}"), extras)?;
            }
        }
        Ok(())
    }

    fn learner(&mut self, node: Node) -> Result<ElmoLearner, ElmoError> {
        let mut l = ElmoLearner::default();
        let mut singles: HashMap<String, String> = HashMap::new();
        self.party(
            node,
            "learner",
            &["citizenship", "givenNames", "familyName", "bday", "gender"],
            &mut l.extras,
            &mut l.identifiers,
            &mut l.current_address,
            &mut |name, v| {
                if let Some(v) = v {
                    singles.insert(name.to_string(), v);
                }
            },
        )?;
        l.citizenship = singles.remove("citizenship");
        l.given_names = singles.remove("givenNames");
        l.family_name = singles.remove("familyName");
        l.birth_date = singles.remove("bday");
        l.gender = singles.remove("gender");
        Ok(l)
    }

    fn issuer(&mut self, node: Node) -> Result<ElmoIssuer, ElmoError> {
        let mut i = ElmoIssuer::default();
        let mut singles: HashMap<String, String> = HashMap::new();
        self.party(
            node,
            "issuer",
            &["country", "title", "url"],
            &mut i.extras,
            &mut i.identifiers,
            &mut i.current_address,
            &mut |name, v| {
                if let Some(v) = v {
                    singles.insert(name.to_string(), v);
                }
            },
        )?;
        i.country = singles.remove("country");
        i.title = singles.remove("title");
        i.url = singles.remove("url");
        Ok(i)
    }

    fn los(
        &mut self,
        node: Node,
        path: String,
        depth: usize,
    ) -> Result<ElmoLearningOpportunity, ElmoError> {
        if depth >= MAX_LOS_DEPTH {
            return Err(violation(
                &path,
                &format!("learning opportunities nested deeper than {MAX_LOS_DEPTH}"),
            ));
        }
        let mut los = ElmoLearningOpportunity {
            path: path.clone(),
            depth,
            los_type: None,
            title: String::new(),
            title_lang: None,
            isced_code: None,
            eqf_level: None,
            language_of_instruction: None,
            grading_scheme: None,
            result: ElmoResult::default(),
            children: Vec::new(),
            extras: Vec::new(),
        };
        let mut extras = Vec::new();
        self.attrs(node, &path, &mut extras, &[]);
        let mut seen = HashSet::new();
        let mut has_title = false;
        let mut child_nodes = Vec::new();
        for (c, seg) in segs(&elements(node)) {
            let name = local(&c);
            match name {
                "title" if seen.insert(name) => {
                    has_title = true;
                    los.title =
                        self.typed_leaf(c, &format!("{path}.title"), &mut extras, &["lang"])?;
                    los.title_lang = c
                        .attribute((roxmltree::NS_XML_URI, "lang"))
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(str::to_string);
                }
                "type" | "iscedCode" if seen.insert(name) => {
                    let v = non_empty(self.typed_leaf(
                        c,
                        &format!("{path}.{name}"),
                        &mut extras,
                        &[],
                    )?);
                    if name == "type" {
                        los.los_type = v;
                    } else {
                        los.isced_code = v;
                    }
                }
                "specifies" if seen.insert(name) => {
                    let sp = format!("{path}.specifies");
                    self.attrs(c, &sp, &mut extras, &[]);
                    let mut got = false;
                    for (cc, cseg) in segs(&elements(c)) {
                        if local(&cc) == "learningOpportunityInstance" && !got {
                            got = true;
                            self.loi(cc, &format!("{sp}.{cseg}"), &mut los, &mut extras)?;
                        } else {
                            self.extras(cc, &format!("{sp}.{cseg}"), &mut extras)?;
                        }
                    }
                }
                "hasPart" => {
                    let hp = format!("{path}.{seg}");
                    self.attrs(c, &hp, &mut extras, &[]);
                    for (cc, cseg) in segs(&elements(c)) {
                        if local(&cc) == "learningOpportunitySpecification" {
                            child_nodes.push(cc);
                        } else {
                            self.extras(cc, &format!("{hp}.{cseg}"), &mut extras)?;
                        }
                    }
                }
                _ => self.extras(c, &format!("{path}.{seg}"), &mut extras)?,
            }
        }
        if !has_title {
            return Err(violation(&format!("{path}.title"), "missing"));
        }
        los.extras = extras;
        for (j, c) in child_nodes.into_iter().enumerate() {
            let child = self.los(c, format!("{path}.children[{j}]"), depth + 1)?;
            los.children.push(child);
        }
        Ok(los)
    }

    fn loi(
        &mut self,
        node: Node,
        prefix: &str,
        los: &mut ElmoLearningOpportunity,
        extras: &mut Vec<Extra>,
    ) -> Result<(), ElmoError> {
        self.attrs(node, prefix, extras, &[]);
        let mut seen = HashSet::new();
        for (c, seg) in segs(&elements(node)) {
            let name = local(&c);
            let p = format!("{prefix}.{seg}");
            match name {
                "resultLabel" | "gradingSchemeLocalId" | "status" | "languageOfInstruction"
                    if seen.insert(name) =>
                {
                    let v = non_empty(self.typed_leaf(c, &p, extras, &[])?);
                    if v.is_some() {
                        match name {
                            "resultLabel" => los.result.grade = v,
                            "gradingSchemeLocalId" => los.grading_scheme = v,
                            "status" => los.result.status = v,
                            _ => los.language_of_instruction = v,
                        }
                    }
                }
                "credit" if seen.insert(name) => {
                    self.attrs(c, &p, extras, &[]);
                    let mut got = HashSet::new();
                    for (cc, cseg) in segs(&elements(c)) {
                        let cname = local(&cc);
                        if (cname == "scheme" || cname == "value") && got.insert(cname) {
                            let v = non_empty(self.typed_leaf(
                                cc,
                                &format!("{p}.{cseg}"),
                                extras,
                                &[],
                            )?);
                            if v.is_some() {
                                if cname == "scheme" {
                                    los.result.credit_scheme = v;
                                } else {
                                    los.result.credits = v;
                                }
                            }
                        } else {
                            self.extras(cc, &format!("{p}.{cseg}"), extras)?;
                        }
                    }
                }
                "level" if !seen.contains("eqf") && is_eqf_level(c) => {
                    seen.insert("eqf");
                    self.attrs(c, &p, extras, &[]);
                    let mut got = false;
                    for (cc, cseg) in segs(&elements(c)) {
                        if local(&cc) == "value" && !got {
                            got = true;
                            let v = non_empty(self.typed_leaf(
                                cc,
                                &format!("{p}.{cseg}"),
                                extras,
                                &[],
                            )?);
                            if v.is_some() {
                                los.eqf_level = v;
                            }
                        } else {
                            self.extras(cc, &format!("{p}.{cseg}"), extras)?;
                        }
                    }
                }
                _ => self.extras(c, &p, extras)?,
            }
        }
        Ok(())
    }

    fn attachment(&mut self, node: Node, prefix: &str) -> Result<ElmoAttachment, ElmoError> {
        let mut a = ElmoAttachment::default();
        self.attrs(node, prefix, &mut a.extras, &[]);
        let mut got = HashSet::new();
        for (c, seg) in segs(&elements(node)) {
            let name = local(&c);
            if (name == "type" || name == "content") && got.insert(name) {
                let v = non_empty(self.typed_leaf(
                    c,
                    &format!("{prefix}.{name}"),
                    &mut a.extras,
                    &[],
                )?);
                if name == "type" {
                    a.type_label = v;
                } else {
                    a.content = v;
                }
            } else {
                self.extras(c, &format!("{prefix}.{seg}"), &mut a.extras)?;
            }
        }
        Ok(a)
    }
}

fn is_eqf_level(node: Node) -> bool {
    node.children()
        .any(|c| c.is_element() && local(&c) == "type" && text_of(c) == "EQF")
}

/// RFC 3339 timestamps; a timestamp without offset is read as UTC.
pub(crate) fn parse_timestamp(text: &str) -> Option<DateTime<Utc>> {
    let t = text.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(t) {
        return Some(dt.with_timezone(&Utc));
    }
    NaiveDateTime::parse_from_str(t, "%Y-%m-%dT%H:%M:%S%.f")
        .ok()
        .map(|n| n.and_utc())
}
