// SPDX-License-Identifier: Apache-2.0

//! Copy-on-write storage shared between forked machine states.
//!
//! Each structure keeps a page table behind an `Arc`; forking clones the
//! outer `Arc` only. The first write after a fork copies the page table
//! (pointer copies) and then the touched page. Page copies are counted per
//! structure; the count is instrumentation and not part of equality.

use alloc::collections::BTreeMap;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::ir::Value;

use super::Trap;

pub const MEMORY_PAGE_CELLS: usize = 64;
pub const OUTPUT_CHUNK_BYTES: usize = 256;
pub const FILE_PAGE_BYTES: usize = 64;
/// Largest simulated file, in bytes.
pub const MAX_FILE_BYTES: u64 = 1 << 20;

type MemPage = [Value; MEMORY_PAGE_CELLS];

/// Copies `page` if it is shared, bumping `copies`, and returns it mutably.
fn page_mut<'a, T: Clone>(page: &'a mut Arc<T>, copies: &mut u64) -> &'a mut T {
    if Arc::get_mut(page).is_none() {
        *copies += 1;
    }
    Arc::make_mut(page)
}

/// Global memory: a fixed number of 64-bit cells in shared pages.
#[derive(Clone, Debug)]
pub struct PagedMemory {
    pages: Arc<Vec<Arc<MemPage>>>,
    len: usize,
    copies: u64,
}

impl PagedMemory {
    pub fn new(len: usize) -> Self {
        let npages = len.div_ceil(MEMORY_PAGE_CELLS);
        PagedMemory {
            pages: Arc::new(
                (0..npages)
                    .map(|_| Arc::new([0; MEMORY_PAGE_CELLS]))
                    .collect(),
            ),
            len,
            copies: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn index(&self, addr: Value) -> Option<usize> {
        usize::try_from(addr).ok().filter(|a| *a < self.len)
    }

    pub fn in_bounds(&self, addr: Value) -> bool {
        self.index(addr).is_some()
    }

    pub fn get(&self, addr: Value) -> Option<Value> {
        let a = self.index(addr)?;
        Some(self.pages[a / MEMORY_PAGE_CELLS][a % MEMORY_PAGE_CELLS])
    }

    pub fn set(&mut self, addr: Value, value: Value) -> Result<(), Trap> {
        let a = self.index(addr).ok_or(Trap::MemoryOutOfBounds)?;
        let table = Arc::make_mut(&mut self.pages);
        page_mut(&mut table[a / MEMORY_PAGE_CELLS], &mut self.copies)[a % MEMORY_PAGE_CELLS] =
            value;
        Ok(())
    }

    pub fn page_copies(&self) -> u64 {
        self.copies
    }

    pub(super) fn reset_copies(&mut self) {
        self.copies = 0;
    }

    pub fn cells(&self) -> impl Iterator<Item = Value> + '_ {
        self.pages
            .iter()
            .flat_map(|p| p.iter().copied())
            .take(self.len)
    }
}

impl PartialEq for PagedMemory {
    fn eq(&self, other: &Self) -> bool {
        self.len == other.len
            && (Arc::ptr_eq(&self.pages, &other.pages)
                || self
                    .pages
                    .iter()
                    .zip(other.pages.iter())
                    .all(|(a, b)| Arc::ptr_eq(a, b) || a == b))
    }
}

impl Eq for PagedMemory {}

/// The program's output stream in fixed-size shared chunks.
#[derive(Clone, Debug)]
pub struct OutputStream {
    chunks: Arc<Vec<Arc<Vec<u8>>>>,
    len: usize,
    copies: u64,
}

impl OutputStream {
    pub fn new() -> Self {
        OutputStream {
            chunks: Arc::new(Vec::new()),
            len: 0,
            copies: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn append(&mut self, mut bytes: &[u8]) {
        if bytes.is_empty() {
            return;
        }
        let chunks = Arc::make_mut(&mut self.chunks);
        while !bytes.is_empty() {
            let need_new = chunks.last().is_none_or(|c| c.len() == OUTPUT_CHUNK_BYTES);
            if need_new {
                chunks.push(Arc::new(Vec::with_capacity(OUTPUT_CHUNK_BYTES)));
            }
            let last = page_mut(chunks.last_mut().unwrap(), &mut self.copies);
            let take = (OUTPUT_CHUNK_BYTES - last.len()).min(bytes.len());
            last.extend_from_slice(&bytes[..take]);
            self.len += take;
            bytes = &bytes[take..];
        }
    }

    pub fn to_vec(&self) -> Vec<u8> {
        let mut v = Vec::with_capacity(self.len);
        for c in self.chunks.iter() {
            v.extend_from_slice(c);
        }
        v
    }

    pub fn page_copies(&self) -> u64 {
        self.copies
    }

    pub(super) fn reset_copies(&mut self) {
        self.copies = 0;
    }
}

impl Default for OutputStream {
    fn default() -> Self {
        Self::new()
    }
}

impl PartialEq for OutputStream {
    fn eq(&self, other: &Self) -> bool {
        self.len == other.len
            && (Arc::ptr_eq(&self.chunks, &other.chunks)
                || self
                    .chunks
                    .iter()
                    .zip(other.chunks.iter())
                    .all(|(a, b)| Arc::ptr_eq(a, b) || a == b))
    }
}

impl Eq for OutputStream {}

type FilePage = [u8; FILE_PAGE_BYTES];

/// A simulated file: a page table into shared byte pages.
#[derive(Clone, Debug, PartialEq, Eq)]
struct SimFile {
    pages: Vec<Arc<FilePage>>,
    len: u64,
}

impl SimFile {
    fn from_bytes(bytes: &[u8]) -> Self {
        let pages = bytes
            .chunks(FILE_PAGE_BYTES)
            .map(|c| {
                let mut p = [0u8; FILE_PAGE_BYTES];
                p[..c.len()].copy_from_slice(c);
                Arc::new(p)
            })
            .collect();
        SimFile {
            pages,
            len: bytes.len() as u64,
        }
    }

    fn byte(&self, pos: u64) -> Option<u8> {
        if pos >= self.len {
            return None;
        }
        let p = pos as usize;
        Some(self.pages[p / FILE_PAGE_BYTES][p % FILE_PAGE_BYTES])
    }

    fn write(&mut self, pos: u64, byte: u8, copies: &mut u64) {
        let p = pos as usize;
        let page = p / FILE_PAGE_BYTES;
        while self.pages.len() <= page {
            self.pages.push(Arc::new([0; FILE_PAGE_BYTES]));
        }
        page_mut(&mut self.pages[page], copies)[p % FILE_PAGE_BYTES] = byte;
        self.len = self.len.max(pos + 1);
    }

    fn bytes(&self) -> Vec<u8> {
        let mut v: Vec<u8> = self.pages.iter().flat_map(|p| p.iter().copied()).collect();
        v.truncate(self.len as usize);
        v
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct OpenFile {
    file: Value,
    cursor: u64,
}

/// In-memory file system. Files are named by integer; handles are indices
/// into the open-file table and are never reused.
#[derive(Clone, Debug)]
pub struct SimFs {
    files: Arc<BTreeMap<Value, SimFile>>,
    handles: Arc<Vec<OpenFile>>,
    copies: u64,
}

impl SimFs {
    pub fn new() -> Self {
        SimFs {
            files: Arc::new(BTreeMap::new()),
            handles: Arc::new(Vec::new()),
            copies: 0,
        }
    }

    /// Installs a file before execution starts.
    pub fn preload(&mut self, file: Value, bytes: &[u8]) {
        Arc::make_mut(&mut self.files).insert(file, SimFile::from_bytes(bytes));
    }

    pub fn contents(&self, file: Value) -> Option<Vec<u8>> {
        self.files.get(&file).map(SimFile::bytes)
    }

    pub fn file_names(&self) -> impl Iterator<Item = Value> + '_ {
        self.files.keys().copied()
    }

    fn handle(&self, h: Value) -> Result<OpenFile, Trap> {
        usize::try_from(h)
            .ok()
            .and_then(|i| self.handles.get(i))
            .copied()
            .ok_or(Trap::BadHandle)
    }

    fn set_cursor(&mut self, h: Value, cursor: u64) {
        Arc::make_mut(&mut self.handles)[h as usize].cursor = cursor;
    }

    /// Opens `file`, creating it empty when absent. Returns the handle.
    pub fn open(&mut self, file: Value) -> Value {
        if !self.files.contains_key(&file) {
            Arc::make_mut(&mut self.files).insert(
                file,
                SimFile {
                    pages: Vec::new(),
                    len: 0,
                },
            );
        }
        let handles = Arc::make_mut(&mut self.handles);
        handles.push(OpenFile { file, cursor: 0 });
        (handles.len() - 1) as Value
    }

    /// Reads one byte at the cursor; `None` at end of file.
    pub fn read_byte(&mut self, h: Value) -> Result<Option<u8>, Trap> {
        let of = self.handle(h)?;
        let b = self.files.get(&of.file).and_then(|f| f.byte(of.cursor));
        if b.is_some() {
            self.set_cursor(h, of.cursor + 1);
        }
        Ok(b)
    }

    pub fn write_byte(&mut self, h: Value, byte: u8) -> Result<(), Trap> {
        let of = self.handle(h)?;
        if of.cursor >= MAX_FILE_BYTES {
            return Err(Trap::FileTooLarge);
        }
        let files = Arc::make_mut(&mut self.files);
        files
            .get_mut(&of.file)
            .expect("open handle names an existing file")
            .write(of.cursor, byte, &mut self.copies);
        self.set_cursor(h, of.cursor + 1);
        Ok(())
    }

    pub fn seek(&mut self, h: Value, offset: Value) -> Result<(), Trap> {
        self.handle(h)?;
        if offset < 0 {
            return Err(Trap::NegativeSeek);
        }
        self.set_cursor(h, offset as u64);
        Ok(())
    }

    pub fn size(&self, h: Value) -> Result<u64, Trap> {
        let of = self.handle(h)?;
        Ok(self.files.get(&of.file).map_or(0, |f| f.len))
    }

    pub fn read(&mut self, h: Value, n: usize) -> Result<Vec<u8>, Trap> {
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            match self.read_byte(h)? {
                Some(b) => out.push(b),
                None => break,
            }
        }
        Ok(out)
    }

    pub fn write(&mut self, h: Value, bytes: &[u8]) -> Result<(), Trap> {
        bytes.iter().try_for_each(|b| self.write_byte(h, *b))
    }

    pub fn page_copies(&self) -> u64 {
        self.copies
    }

    pub(super) fn reset_copies(&mut self) {
        self.copies = 0;
    }

    pub(super) fn encode_into(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&(self.files.len() as u64).to_le_bytes());
        for (name, f) in self.files.iter() {
            out.extend_from_slice(&name.to_le_bytes());
            out.extend_from_slice(&f.len.to_le_bytes());
            out.extend_from_slice(&f.bytes());
        }
        out.extend_from_slice(&(self.handles.len() as u64).to_le_bytes());
        for h in self.handles.iter() {
            out.extend_from_slice(&h.file.to_le_bytes());
            out.extend_from_slice(&h.cursor.to_le_bytes());
        }
    }
}

impl Default for SimFs {
    fn default() -> Self {
        Self::new()
    }
}

impl PartialEq for SimFs {
    fn eq(&self, other: &Self) -> bool {
        (Arc::ptr_eq(&self.files, &other.files) || self.files == other.files)
            && self.handles == other.handles
    }
}

impl Eq for SimFs {}
