//! Minimal text extraction from PDF content streams.
//!
//! Handles uncompressed and FlateDecode streams and the text-showing
//! operators `Tj`, `TJ`, `'` and `"`. Fonts with custom encodings come
//! out as Latin-1 garbage, which the caller detects as a partial result.

use std::io::Read;

use flate2::read::ZlibDecoder;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PdfText {
    pub text: String,
    /// Streams that contained text operators.
    pub content_streams: usize,
    /// Streams whose filter could not be decoded.
    pub failed_streams: usize,
    pub is_pdf: bool,
}

fn find(hay: &[u8], needle: &[u8], from: usize) -> Option<usize> {
    if from >= hay.len() || needle.is_empty() {
        return None;
    }
    hay[from..]
        .windows(needle.len())
        .position(|w| w == needle)
        .map(|p| p + from)
}

fn rfind(hay: &[u8], needle: &[u8], before: usize) -> Option<usize> {
    let end = before.min(hay.len());
    hay[..end].windows(needle.len()).rposition(|w| w == needle)
}

fn contains(hay: &[u8], needle: &[u8]) -> bool {
    find(hay, needle, 0).is_some()
}

enum Decoded {
    Data(Vec<u8>),
    Skip,
    Failed,
}

/// `key` as a whole name, so `/Length1` does not match `/Length 1`.
fn has_key(dict: &[u8], key: &[u8]) -> bool {
    let mut from = 0;
    while let Some(at) = find(dict, key, from) {
        match dict.get(at + key.len()) {
            Some(b) if b.is_ascii_alphanumeric() => from = at + 1,
            _ => return true,
        }
    }
    false
}

fn decode_stream(dict: &[u8], raw: &[u8]) -> Decoded {
    let compact: Vec<u8> = dict.iter().copied().filter(|b| !b.is_ascii_whitespace()).collect();
    if contains(&compact, b"/Subtype/Image")
        || contains(&compact, b"/Type/XObject")
        || contains(&compact, b"/Type/ObjStm")
        || contains(&compact, b"/Type/XRef")
        || has_key(dict, b"/Length1")
        || has_key(dict, b"/Length2")
    {
        return Decoded::Skip;
    }
    if contains(&compact, b"/FlateDecode") || contains(&compact, b"/Fl]") || compact.ends_with(b"/Fl") {
        let mut out = Vec::new();
        match ZlibDecoder::new(raw).read_to_end(&mut out) {
            Ok(_) => Decoded::Data(out),
            // keep whatever decoded before the corruption
            Err(_) if !out.is_empty() => Decoded::Data(out),
            Err(_) => Decoded::Failed,
        }
    } else if contains(&compact, b"/Filter") {
        Decoded::Skip
    } else {
        Decoded::Data(raw.to_vec())
    }
}

/// Extracts readable text. Never panics; garbage input yields empty text.
pub fn extract_pdf_text(bytes: &[u8]) -> PdfText {
    let head = &bytes[..bytes.len().min(1024)];
    if !contains(head, b"%PDF") {
        return PdfText::default();
    }
    let mut out = PdfText {
        is_pdf: true,
        ..Default::default()
    };
    let mut pos = 0;
    while let Some(kw) = find(bytes, b"stream", pos) {
        pos = kw + 6;
        if kw >= 3 && &bytes[kw - 3..kw] == b"end" {
            continue;
        }
        let mut start = kw + 6;
        if bytes.get(start) == Some(&b'\r') {
            start += 1;
        }
        if bytes.get(start) == Some(&b'\n') {
            start += 1;
        }
        let Some(end) = find(bytes, b"endstream", start) else {
            break;
        };
        let dict_start = rfind(bytes, b"obj", kw).unwrap_or(0);
        let dict = &bytes[dict_start..kw];
        let raw = &bytes[start..end];
        pos = end + 9;
        match decode_stream(dict, raw) {
            Decoded::Data(data) => {
                if contains(&data, b"BT") && (contains(&data, b"Tj") || contains(&data, b"TJ") || contains(&data, b"'")) {
                    let text = content_text(&data);
                    if !text.trim().is_empty() {
                        out.content_streams += 1;
                        out.text.push_str(&text);
                        out.text.push('\n');
                    }
                }
            }
            Decoded::Failed => out.failed_streams += 1,
            Decoded::Skip => {}
        }
    }
    out.text = tidy(&out.text);
    out
}

fn tidy(text: &str) -> String {
    let mut lines: Vec<String> = Vec::new();
    let mut blank = 0;
    for line in text.lines() {
        let l = line.split_whitespace().collect::<Vec<_>>().join(" ");
        if l.is_empty() {
            blank += 1;
            if blank == 1 && !lines.is_empty() {
                lines.push(String::new());
            }
        } else {
            blank = 0;
            lines.push(l);
        }
    }
    while lines.last().is_some_and(|l| l.is_empty()) {
        lines.pop();
    }
    lines.join("\n")
}

#[derive(Debug, Clone)]
enum Operand {
    Num(f64),
    Str(Vec<u8>),
    ArrayStart,
    Array(Vec<Operand>),
    Other,
}

fn is_delim(b: u8) -> bool {
    matches!(b, b'(' | b')' | b'<' | b'>' | b'[' | b']' | b'{' | b'}' | b'/' | b'%')
}

fn latin1(bytes: &[u8]) -> String {
    bytes
        .iter()
        .map(|&b| match b {
            b'\n' | b'\r' | b'\t' => ' ',
            0..=31 | 127..=159 => '\u{FFFD}',
            _ => b as char,
        })
        .collect()
}

fn read_literal(data: &[u8], mut i: usize) -> (Vec<u8>, usize) {
    let mut out = Vec::new();
    let mut depth = 1;
    while i < data.len() {
        let b = data[i];
        i += 1;
        match b {
            b'\\' => {
                let Some(&n) = data.get(i) else { break };
                i += 1;
                match n {
                    b'n' => out.push(b'\n'),
                    b'r' => out.push(b'\r'),
                    b't' => out.push(b'\t'),
                    b'b' => out.push(8),
                    b'f' => out.push(12),
                    b'0'..=b'7' => {
                        let mut v = (n - b'0') as u32;
                        for _ in 0..2 {
                            match data.get(i) {
                                Some(&d @ b'0'..=b'7') => {
                                    v = v * 8 + (d - b'0') as u32;
                                    i += 1;
                                }
                                _ => break,
                            }
                        }
                        out.push((v & 0xFF) as u8);
                    }
                    b'\r' => {
                        if data.get(i) == Some(&b'\n') {
                            i += 1;
                        }
                    }
                    b'\n' => {}
                    other => out.push(other),
                }
            }
            b'(' => {
                depth += 1;
                out.push(b);
            }
            b')' => {
                depth -= 1;
                if depth == 0 {
                    break;
                }
                out.push(b);
            }
            _ => out.push(b),
        }
    }
    (out, i)
}

fn read_hex(data: &[u8], mut i: usize) -> (Vec<u8>, usize) {
    let mut digits = Vec::new();
    while i < data.len() && data[i] != b'>' {
        if data[i].is_ascii_hexdigit() {
            digits.push(data[i]);
        }
        i += 1;
    }
    i += 1;
    if digits.len() % 2 == 1 {
        digits.push(b'0');
    }
    let bytes = digits
        .chunks(2)
        .filter_map(|c| u8::from_str_radix(std::str::from_utf8(c).ok()?, 16).ok())
        .collect();
    (bytes, i)
}

fn close_array(stack: &mut Vec<Operand>) {
    let Some(open) = stack.iter().rposition(|o| matches!(o, Operand::ArrayStart)) else {
        return;
    };
    let items = stack.split_off(open + 1);
    stack.pop();
    stack.push(Operand::Array(items));
}

fn last_string(stack: &[Operand]) -> Option<&[u8]> {
    stack.iter().rev().find_map(|o| match o {
        Operand::Str(s) => Some(s.as_slice()),
        _ => None,
    })
}

fn nums(stack: &[Operand]) -> Vec<f64> {
    stack
        .iter()
        .filter_map(|o| match o {
            Operand::Num(n) => Some(*n),
            _ => None,
        })
        .collect()
}

fn content_text(data: &[u8]) -> String {
    let mut out = String::new();
    let mut stack: Vec<Operand> = Vec::new();
    let mut in_text = false;
    let mut i = 0;
    while i < data.len() {
        let b = data[i];
        if b.is_ascii_whitespace() || b == 0 {
            i += 1;
            continue;
        }
        match b {
            b'%' => {
                while i < data.len() && data[i] != b'\n' && data[i] != b'\r' {
                    i += 1;
                }
            }
            b'(' => {
                let (s, next) = read_literal(data, i + 1);
                stack.push(Operand::Str(s));
                i = next;
            }
            b'<' if data.get(i + 1) == Some(&b'<') => {
                stack.push(Operand::Other);
                i += 2;
            }
            b'>' => {
                i += if data.get(i + 1) == Some(&b'>') { 2 } else { 1 };
            }
            b'<' => {
                let (s, next) = read_hex(data, i + 1);
                stack.push(Operand::Str(s));
                i = next;
            }
            b'[' => {
                stack.push(Operand::ArrayStart);
                i += 1;
            }
            b']' => {
                close_array(&mut stack);
                i += 1;
            }
            b'/' => {
                i += 1;
                while i < data.len() && !data[i].is_ascii_whitespace() && !is_delim(data[i]) {
                    i += 1;
                }
                stack.push(Operand::Other);
            }
            _ => {
                let start = i;
                while i < data.len() && !data[i].is_ascii_whitespace() && !is_delim(data[i]) {
                    i += 1;
                }
                if i == start {
                    // stray delimiter such as ')' or '{'
                    i += 1;
                    continue;
                }
                let tok = &data[start..i];
                if let Some(n) = std::str::from_utf8(tok).ok().and_then(|t| t.parse::<f64>().ok()) {
                    stack.push(Operand::Num(n));
                    continue;
                }
                match tok {
                    b"BT" => in_text = true,
                    b"ET" => {
                        in_text = false;
                        out.push('\n');
                    }
                    b"Tj" if in_text => {
                        if let Some(s) = last_string(&stack) {
                            out.push_str(&latin1(s));
                        }
                    }
                    b"'" | b"\"" if in_text => {
                        out.push('\n');
                        if let Some(s) = last_string(&stack) {
                            out.push_str(&latin1(s));
                        }
                    }
                    b"TJ" if in_text => {
                        if let Some(Operand::Array(items)) =
                            stack.iter().rev().find(|o| matches!(o, Operand::Array(_)))
                        {
                            for item in items {
                                match item {
                                    Operand::Str(s) => out.push_str(&latin1(s)),
                                    Operand::Num(n) if *n < -200.0 => out.push(' '),
                                    _ => {}
                                }
                            }
                        }
                    }
                    b"T*" if in_text => out.push('\n'),
                    b"Td" | b"TD" if in_text => {
                        let n = nums(&stack);
                        if n.len() >= 2 {
                            if n[n.len() - 1] != 0.0 {
                                out.push('\n');
                            } else if n[n.len() - 2] > 0.0 {
                                out.push(' ');
                            }
                        }
                    }
                    b"Tm" if in_text => out.push('\n'),
                    _ => {}
                }
                stack.clear();
            }
        }
        if stack.len() > 4096 {
            stack.clear();
        }
    }
    out
}

/// Builds a small single-page PDF; one text line per entry. Test support.
#[doc(hidden)]
pub fn build_test_pdf(lines: &[&str], compress: bool) -> Vec<u8> {
    use flate2::write::ZlibEncoder;
    use flate2::Compression;
    use std::io::Write;

    let mut content = String::from("BT\n/F1 11 Tf\n72 720 Td\n14 TL\n");
    for line in lines {
        let escaped = line
            .replace('\\', "\\\\")
            .replace('(', "\\(")
            .replace(')', "\\)");
        content.push_str(&format!("({escaped}) Tj\nT*\n"));
    }
    content.push_str("ET\n");
    let (stream, filter) = if compress {
        let mut enc = ZlibEncoder::new(Vec::new(), Compression::default());
        enc.write_all(content.as_bytes()).expect("in-memory write");
        (enc.finish().expect("in-memory write"), " /Filter /FlateDecode")
    } else {
        (content.into_bytes(), "")
    };

    let mut pdf: Vec<u8> = b"%PDF-1.4\n".to_vec();
    let mut offsets = Vec::new();
    let objects: Vec<Vec<u8>> = vec![
        b"<< /Type /Catalog /Pages 2 0 R >>".to_vec(),
        b"<< /Type /Pages /Kids [3 0 R] /Count 1 >>".to_vec(),
        b"<< /Type /Page /Parent 2 0 R /MediaBox [0 0 612 792] /Contents 4 0 R /Resources << /Font << /F1 5 0 R >> >> >>".to_vec(),
        {
            let mut o = format!("<< /Length {}{} >>\nstream\n", stream.len(), filter).into_bytes();
            o.extend_from_slice(&stream);
            o.extend_from_slice(b"\nendstream");
            o
        },
        b"<< /Type /Font /Subtype /Type1 /BaseFont /Helvetica >>".to_vec(),
    ];
    for (n, body) in objects.iter().enumerate() {
        offsets.push(pdf.len());
        pdf.extend_from_slice(format!("{} 0 obj\n", n + 1).as_bytes());
        pdf.extend_from_slice(body);
        pdf.extend_from_slice(b"\nendobj\n");
    }
    let xref = pdf.len();
    pdf.extend_from_slice(format!("xref\n0 {}\n0000000000 65535 f \n", objects.len() + 1).as_bytes());
    for off in offsets {
        pdf.extend_from_slice(format!("{off:010} 00000 n \n").as_bytes());
    }
    pdf.extend_from_slice(
        format!(
            "trailer\n<< /Size {} /Root 1 0 R >>\nstartxref\n{xref}\n%%EOF\n",
            objects.len() + 1
        )
        .as_bytes(),
    );
    pdf
}
