//! Block scanner over raw bytes.
//!
//! Works directly on the reader's buffer, jumping between delimiter, quote
//! and line-break bytes with `memchr`, and decodes UTF-8 once per field.
//! The dialect characters are ASCII, so a field boundary can never split a
//! multi-byte sequence.

use std::io::{BufRead, BufReader, Cursor, Read};

use memchr::{memchr, memchr2, memchr3};

use super::{invalid_utf8, read_failure, unterminated, ParserBackend, RawField, RawRow, RecordReader, RowIter, Rows};
use crate::model::CsvSettings;
use crate::value::Reason;

const BUFFER_SIZE: usize = 1 << 16;
const BOM: &[u8] = b"\xEF\xBB\xBF";

/// Performance-oriented backend.
#[derive(Debug, Clone)]
pub struct FastParser {
    settings: CsvSettings,
    last_error: Option<String>,
}

impl FastParser {
    pub fn new(settings: CsvSettings) -> FastParser {
        FastParser {
            settings,
            last_error: None,
        }
    }
}

impl ParserBackend for FastParser {
    fn parse<'a>(&'a mut self, input: Box<dyn Read + 'a>) -> Rows<'a> {
        self.last_error = None;
        let reader = FastRecords::new(input, &self.settings);
        Box::new(RowIter {
            reader,
            error: &mut self.last_error,
            done: false,
        })
    }

    fn last_error(&self) -> Reason {
        self.last_error.clone()
    }

    fn clear(&mut self) {
        self.last_error = None;
    }

    fn settings(&self) -> &CsvSettings {
        &self.settings
    }
}

struct FastRecords<'a> {
    input: Option<Box<dyn Read + 'a>>,
    reader: Option<BufReader<Box<dyn Read + 'a>>>,
    delimiter: u8,
    quote: u8,
    comment: Option<u8>,
    space_blank: bool,
    tab_blank: bool,
    skip_blank_lines: bool,
    trim: bool,
    line: usize,
}

fn ascii(c: char) -> u8 {
    u8::try_from(c).expect("dialect characters are ASCII")
}

/// Number of line breaks, counting CRLF once.
fn count_breaks(bytes: &[u8]) -> usize {
    let lf = memchr::memchr_iter(b'\n', bytes).count();
    let lone_cr = memchr::memchr_iter(b'\r', bytes)
        .filter(|&i| bytes.get(i + 1) != Some(&b'\n'))
        .count();
    lf + lone_cr
}

impl<'a> FastRecords<'a> {
    fn new(input: Box<dyn Read + 'a>, settings: &CsvSettings) -> Self {
        FastRecords {
            input: Some(input),
            reader: None,
            delimiter: ascii(settings.delimiter),
            quote: ascii(settings.quote),
            comment: settings.line_comment.map(ascii),
            space_blank: settings.is_blank(' '),
            tab_blank: settings.is_blank('\t'),
            skip_blank_lines: settings.skip_blank_lines,
            trim: settings.trim_unquoted,
            line: 1,
        }
    }

    /// Lazily opens the buffered reader, dropping a leading BOM.
    fn reader(&mut self) -> Result<&mut BufReader<Box<dyn Read + 'a>>, String> {
        if self.reader.is_none() {
            let mut input = self.input.take().expect("input is consumed once");
            let mut prefix = Vec::with_capacity(3);
            while prefix.len() < 3 {
                let mut byte = [0u8; 3];
                let want = 3 - prefix.len();
                match input.read(&mut byte[..want]) {
                    Ok(0) => break,
                    Ok(n) => prefix.extend_from_slice(&byte[..n]),
                    Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
                    Err(e) => return Err(read_failure(1, &e)),
                }
            }
            if prefix == BOM {
                prefix.clear();
            }
            let chained: Box<dyn Read + 'a> = Box::new(Cursor::new(prefix).chain(input));
            self.reader = Some(BufReader::with_capacity(BUFFER_SIZE, chained));
        }
        Ok(self.reader.as_mut().expect("reader was just opened"))
    }

    fn buffer(&mut self) -> Result<&[u8], String> {
        let line = self.line;
        let reader = self.reader()?;
        loop {
            match reader.fill_buf() {
                Ok(_) => break,
                Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
                Err(e) => return Err(read_failure(line, &e)),
            }
        }
        Ok(reader.buffer())
    }

    fn consume(&mut self, n: usize) {
        if let Some(reader) = self.reader.as_mut() {
            reader.consume(n);
        }
    }

    fn peek(&mut self) -> Result<Option<u8>, String> {
        Ok(self.buffer()?.first().copied())
    }

    fn is_blank(&self, b: u8) -> bool {
        (b == b' ' && self.space_blank) || (b == b'\t' && self.tab_blank)
    }

    fn collect_blanks(&mut self, out: &mut Vec<u8>) -> Result<(), String> {
        let (space, tab) = (self.space_blank, self.tab_blank);
        loop {
            let buf = self.buffer()?;
            let n = buf
                .iter()
                .take_while(|&&b| (b == b' ' && space) || (b == b'\t' && tab))
                .count();
            if n == 0 {
                return Ok(());
            }
            out.extend_from_slice(&buf[..n]);
            let whole = n == buf.len();
            self.consume(n);
            if !whole {
                return Ok(());
            }
        }
    }

    /// Appends bytes up to (not including) the next delimiter or line break.
    fn take_unquoted(&mut self, out: &mut Vec<u8>) -> Result<(), String> {
        let delimiter = self.delimiter;
        loop {
            let buf = self.buffer()?;
            if buf.is_empty() {
                return Ok(());
            }
            match memchr3(delimiter, b'\n', b'\r', buf) {
                Some(i) => {
                    out.extend_from_slice(&buf[..i]);
                    self.consume(i);
                    return Ok(());
                }
                None => {
                    let n = buf.len();
                    out.extend_from_slice(buf);
                    self.consume(n);
                }
            }
        }
    }

    fn skip_line(&mut self) -> Result<(), String> {
        let mut scratch = Vec::new();
        loop {
            let buf = self.buffer()?;
            if buf.is_empty() {
                break;
            }
            match memchr2(b'\n', b'\r', buf) {
                Some(i) => {
                    scratch.extend_from_slice(&buf[..i]);
                    self.consume(i);
                    break;
                }
                None => {
                    let n = buf.len();
                    scratch.extend_from_slice(buf);
                    self.consume(n);
                }
            }
        }
        if std::str::from_utf8(&scratch).is_err() {
            return Err(invalid_utf8(self.line));
        }
        self.skip_terminator()
    }

    fn skip_terminator(&mut self) -> Result<(), String> {
        match self.peek()? {
            Some(b'\n') => {
                self.consume(1);
                self.line += 1;
            }
            Some(b'\r') => {
                self.consume(1);
                if self.peek()? == Some(b'\n') {
                    self.consume(1);
                }
                self.line += 1;
            }
            _ => {}
        }
        Ok(())
    }

    fn decode(&self, bytes: Vec<u8>, start_line: usize) -> Result<String, String> {
        String::from_utf8(bytes).map_err(|e| {
            let valid = e.utf8_error().valid_up_to();
            invalid_utf8(start_line + count_breaks(&e.as_bytes()[..valid]))
        })
    }

    fn unquoted_field(&self, mut bytes: Vec<u8>) -> Result<RawField, String> {
        if self.trim {
            let end = bytes.iter().rposition(|&b| !self.is_blank(b)).map_or(0, |i| i + 1);
            bytes.truncate(end);
            let start = bytes.iter().position(|&b| !self.is_blank(b)).unwrap_or(bytes.len());
            bytes.drain(..start);
        }
        Ok(RawField::unquoted(self.decode(bytes, self.line)?))
    }

    fn quoted_field(&mut self) -> Result<RawField, String> {
        let start = self.line;
        let quote = self.quote;
        self.consume(1);
        let mut content = Vec::new();
        loop {
            let buf = self.buffer()?;
            if buf.is_empty() {
                return Err(unterminated(start));
            }
            match memchr(quote, buf) {
                Some(i) => {
                    content.extend_from_slice(&buf[..i]);
                    self.consume(i + 1);
                    if self.peek()? == Some(quote) {
                        content.push(quote);
                        self.consume(1);
                    } else {
                        break;
                    }
                }
                None => {
                    let n = buf.len();
                    content.extend_from_slice(buf);
                    self.consume(n);
                }
            }
        }
        let breaks = count_breaks(&content);
        let mut tail = Vec::new();
        self.take_unquoted(&mut tail)?;
        content.extend(tail.into_iter().filter(|&b| !self.is_blank(b)));
        let text = self.decode(content, start)?;
        self.line += breaks;
        Ok(RawField::quoted(text))
    }

    /// Splits a whole buffered line in one pass when it has no quote, is
    /// not blank and is not a comment. Consumes nothing otherwise.
    fn plain_line(&mut self) -> Result<Option<RawRow>, String> {
        let (delimiter, quote, comment, trim) = (self.delimiter, self.quote, self.comment, self.trim);
        let (space, tab) = (self.space_blank, self.tab_blank);
        let blank = move |b: u8| (b == b' ' && space) || (b == b'\t' && tab);
        let buf = self.buffer()?;
        let Some(end) = memchr2(b'\n', b'\r', buf) else {
            return Ok(None);
        };
        let line = &buf[..end];
        if memchr(quote, line).is_some() {
            return Ok(None);
        }
        match line.iter().position(|&b| !blank(b)) {
            Some(i) if Some(line[i]) != comment => {}
            _ => return Ok(None),
        }
        let Ok(text) = std::str::from_utf8(line) else {
            return Ok(None);
        };
        let row = text
            .split(char::from(delimiter))
            .map(|field| {
                let field = if trim {
                    field.trim_matches(|c: char| c.is_ascii() && blank(c as u8))
                } else {
                    field
                };
                RawField::unquoted(field)
            })
            .collect();
        self.consume(end);
        self.skip_terminator()?;
        Ok(Some(row))
    }

    fn read_record(&mut self) -> Result<Option<RawRow>, String> {
        if let Some(row) = self.plain_line()? {
            return Ok(Some(row));
        }
        let lead = loop {
            let mut lead = Vec::new();
            self.collect_blanks(&mut lead)?;
            match self.peek()? {
                None if lead.is_empty() || self.skip_blank_lines => return Ok(None),
                None => return Ok(Some(vec![self.unquoted_field(lead)?])),
                Some(b'\n' | b'\r') => {
                    self.skip_terminator()?;
                    if !self.skip_blank_lines {
                        return Ok(Some(vec![self.unquoted_field(lead)?]));
                    }
                }
                Some(b) if Some(b) == self.comment => self.skip_line()?,
                Some(_) => break lead,
            }
        };

        let mut row = Vec::new();
        let mut lead = lead;
        loop {
            self.collect_blanks(&mut lead)?;
            let field = if self.peek()? == Some(self.quote) {
                self.quoted_field()?
            } else {
                self.take_unquoted(&mut lead)?;
                self.unquoted_field(lead)?
            };
            row.push(field);
            lead = Vec::new();
            if self.peek()? == Some(self.delimiter) {
                self.consume(1);
            } else {
                self.skip_terminator()?;
                return Ok(Some(row));
            }
        }
    }
}

impl RecordReader for FastRecords<'_> {
    fn next_record(&mut self) -> Result<Option<RawRow>, String> {
        self.read_record()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn breaks() {
        assert_eq!(count_breaks(b"a\r\nb\rc\nd"), 3);
        assert_eq!(count_breaks(b"\r"), 1);
        assert_eq!(count_breaks(b""), 0);
    }

    /// Hands out one byte per read call.
    struct Trickle(Vec<u8>, usize);

    impl Read for Trickle {
        fn read(&mut self, buf: &mut [u8]) -> std::io::Result<usize> {
            if self.1 >= self.0.len() || buf.is_empty() {
                return Ok(0);
            }
            buf[0] = self.0[self.1];
            self.1 += 1;
            Ok(1)
        }
    }

    #[test]
    fn tiny_reads() {
        let input = "\u{feff}a,\"b\r\n\"\"c\"\"\"\r\nd,é\r".as_bytes().to_vec();
        let mut parser = FastParser::new(CsvSettings::default());
        let rows: Vec<Vec<String>> = parser
            .parse(Box::new(Trickle(input, 0)))
            .map(|r| r.into_iter().map(|f| f.text).collect())
            .collect();
        assert_eq!(rows, vec![vec!["a", "b\r\n\"c\""], vec!["d", "é"]]);
        assert_eq!(parser.last_error(), None);
    }
}
