//! Character-at-a-time state machine over decoded input lines.

use std::io::{BufRead, BufReader, Read};

use super::{invalid_utf8, read_failure, unterminated, ParserBackend, RawField, RawRow, RecordReader, RowIter, Rows};
use crate::model::CsvSettings;
use crate::value::Reason;

/// The reference backend: decodes input line by line and walks it one
/// `char` at a time.
#[derive(Debug, Clone)]
pub struct NativeParser {
    settings: CsvSettings,
    last_error: Option<String>,
}

impl NativeParser {
    pub fn new(settings: CsvSettings) -> NativeParser {
        NativeParser {
            settings,
            last_error: None,
        }
    }
}

impl ParserBackend for NativeParser {
    fn parse<'a>(&'a mut self, input: Box<dyn Read + 'a>) -> Rows<'a> {
        self.last_error = None;
        let reader = NativeRecords {
            src: CharSource::new(BufReader::new(input)),
            settings: self.settings.clone(),
        };
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

/// Decoded characters, refilled one `\n`-terminated chunk at a time.
struct CharSource<R> {
    reader: R,
    bytes: Vec<u8>,
    chars: Vec<char>,
    pos: usize,
    /// 1-based line of the next character.
    line: usize,
    started: bool,
    exhausted: bool,
    error: Option<String>,
}

impl<R: BufRead> CharSource<R> {
    fn new(reader: R) -> Self {
        CharSource {
            reader,
            bytes: Vec::new(),
            chars: Vec::new(),
            pos: 0,
            line: 1,
            started: false,
            exhausted: false,
            error: None,
        }
    }

    fn refill(&mut self) -> bool {
        if self.exhausted {
            return false;
        }
        self.bytes.clear();
        self.chars.clear();
        self.pos = 0;
        match self.reader.read_until(b'\n', &mut self.bytes) {
            Ok(0) => {
                self.exhausted = true;
                return false;
            }
            Ok(_) => {}
            Err(err) => {
                self.error = Some(read_failure(self.line, &err));
                self.exhausted = true;
                return false;
            }
        }
        let text = match std::str::from_utf8(&self.bytes) {
            Ok(text) => text,
            Err(err) => {
                // keep the valid prefix; the error surfaces once it is consumed
                let valid = std::str::from_utf8(&self.bytes[..err.valid_up_to()]).unwrap_or_default();
                let breaks = valid.matches('\r').count();
                self.error = Some(invalid_utf8(self.line + breaks));
                self.exhausted = true;
                valid
            }
        };
        self.chars.extend(text.chars());
        if !self.started {
            self.started = true;
            if self.chars.first() == Some(&'\u{feff}') {
                self.pos = 1;
            }
        }
        self.pos < self.chars.len() || self.refill()
    }

    fn peek(&mut self) -> Option<char> {
        if self.pos >= self.chars.len() && !self.refill() {
            return None;
        }
        Some(self.chars[self.pos])
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += 1;
        match c {
            '\n' => self.line += 1,
            '\r' if self.peek() != Some('\n') => self.line += 1,
            _ => {}
        }
        Some(c)
    }
}

struct NativeRecords<R> {
    src: CharSource<R>,
    settings: CsvSettings,
}

impl<R: BufRead> RecordReader for NativeRecords<R> {
    fn next_record(&mut self) -> Result<Option<RawRow>, String> {
        let record = self.read_record();
        // a decoding failure looks like end of input to the state machine
        if let Some(err) = self.src.error.take() {
            return Err(err);
        }
        record
    }
}

impl<R: BufRead> NativeRecords<R> {
    fn is_blank(&self, c: char) -> bool {
        self.settings.is_blank(c)
    }

    fn collect_blanks(&mut self, out: &mut String) {
        while let Some(c) = self.src.peek() {
            if !self.is_blank(c) {
                break;
            }
            out.push(c);
            self.src.bump();
        }
    }

    /// Consumes one CR, LF or CRLF if present.
    fn skip_terminator(&mut self) {
        match self.src.peek() {
            Some('\n') => {
                self.src.bump();
            }
            Some('\r') => {
                self.src.bump();
                if self.src.peek() == Some('\n') {
                    self.src.bump();
                }
            }
            _ => {}
        }
    }

    fn read_record(&mut self) -> Result<Option<RawRow>, String> {
        let lead = loop {
            let mut lead = String::new();
            self.collect_blanks(&mut lead);
            match self.src.peek() {
                None if lead.is_empty() || self.settings.skip_blank_lines => return Ok(None),
                None => return Ok(Some(vec![self.unquoted(lead)])),
                Some('\n' | '\r') => {
                    self.skip_terminator();
                    if !self.settings.skip_blank_lines {
                        return Ok(Some(vec![self.unquoted(lead)]));
                    }
                }
                Some(c) if Some(c) == self.settings.line_comment => {
                    while !matches!(self.src.peek(), None | Some('\n' | '\r')) {
                        self.src.bump();
                    }
                    self.skip_terminator();
                }
                Some(_) => break lead,
            }
        };

        let mut row = Vec::new();
        let mut lead = lead;
        loop {
            self.collect_blanks(&mut lead);
            let field = if self.src.peek() == Some(self.settings.quote) {
                self.quoted()?
            } else {
                self.unquoted_from(lead)
            };
            row.push(field);
            lead = String::new();
            match self.src.peek() {
                Some(c) if c == self.settings.delimiter => {
                    self.src.bump();
                }
                _ => {
                    self.skip_terminator();
                    return Ok(Some(row));
                }
            }
        }
    }

    fn unquoted(&self, text: String) -> RawField {
        if self.settings.trim_unquoted {
            RawField::unquoted(text.trim_matches(|c| self.is_blank(c)))
        } else {
            RawField::unquoted(text)
        }
    }

    fn unquoted_from(&mut self, mut text: String) -> RawField {
        while let Some(c) = self.src.peek() {
            if c == self.settings.delimiter || c == '\n' || c == '\r' {
                break;
            }
            text.push(c);
            self.src.bump();
        }
        self.unquoted(text)
    }

    fn quoted(&mut self) -> Result<RawField, String> {
        let start = self.src.line;
        let quote = self.settings.quote;
        self.src.bump();
        let mut text = String::new();
        loop {
            match self.src.bump() {
                None => return Err(unterminated(start)),
                Some(c) if c == quote => {
                    if self.src.peek() == Some(quote) {
                        self.src.bump();
                        text.push(quote);
                    } else {
                        break;
                    }
                }
                Some(c) => text.push(c),
            }
        }
        while let Some(c) = self.src.peek() {
            if c == self.settings.delimiter || c == '\n' || c == '\r' {
                break;
            }
            self.src.bump();
            if !self.is_blank(c) {
                text.push(c);
            }
        }
        Ok(RawField::quoted(text))
    }
}
