"""Simulated main memory with per-8-byte-word status tracking.

Every 64-bit word is in one of three states.  Words start out
``status_default``; an instruction fetch promotes touched default words to
``status_immutable``; a write to an immutable word fires the word's
invalidation callbacks (before the bytes change) and demotes it to
``status_mutable``, where it stays.  Data reads and writes never change a
default word's status, and immutable never returns to default.

The byte store is a sparse map of 4 KiB pages, so large address spaces only
cost memory proportional to the pages actually touched.
"""

from __future__ import annotations

from .values import ModelTrap

STATUS_DEFAULT = 0
STATUS_IMMUTABLE = 1
STATUS_MUTABLE = 2

STATUS_NAMES = {
    STATUS_DEFAULT: "status_default",
    STATUS_IMMUTABLE: "status_immutable",
    STATUS_MUTABLE: "status_mutable",
}

PAGE_SIZE = 4096
PAGE_WORDS = PAGE_SIZE // 8


class SimMemory:
    def __init__(self, size=1 << 33, tracking=True):
        self.size = size
        self.tracking = tracking
        self.pages = {}
        self.word_status = {}  # page base -> bytearray(PAGE_WORDS)
        self.callbacks = {}  # word index -> [callback_id...]
        self.invalidation_sink = None  # callable(word_index, [callback_id...])

    # -- byte plumbing

    def _page(self, base):
        page = self.pages.get(base)
        if page is None:
            page = self.pages[base] = bytearray(PAGE_SIZE)
        return page

    def _check(self, addr, nbytes):
        if addr < 0 or addr + nbytes > self.size:
            raise ModelTrap("memory access out of bounds: 0x%x+%d" % (addr, nbytes))

    def _load_bytes(self, addr, nbytes):
        base = addr & ~(PAGE_SIZE - 1)
        off = addr - base
        if off + nbytes <= PAGE_SIZE:
            page = self.pages.get(base)
            if page is None:
                return 0
            return int.from_bytes(page[off : off + nbytes], "little")
        out = 0
        for i in range(nbytes):
            b = addr + i
            page = self.pages.get(b & ~(PAGE_SIZE - 1))
            out |= (page[b & (PAGE_SIZE - 1)] if page is not None else 0) << (8 * i)
        return out

    def _store_bytes(self, addr, nbytes, value):
        base = addr & ~(PAGE_SIZE - 1)
        off = addr - base
        data = value.to_bytes(nbytes, "little")
        if off + nbytes <= PAGE_SIZE:
            self._page(base)[off : off + nbytes] = data
            return
        for i in range(nbytes):
            b = addr + i
            self._page(b & ~(PAGE_SIZE - 1))[b & (PAGE_SIZE - 1)] = data[i]

    def _words(self, addr, nbytes):
        return range(addr >> 3, (addr + nbytes - 1 >> 3) + 1)

    def _status_slot(self, word):
        base = (word << 3) & ~(PAGE_SIZE - 1)
        arr = self.word_status.get(base)
        if arr is None:
            arr = self.word_status[base] = bytearray(PAGE_WORDS)
        return arr, word & (PAGE_WORDS - 1)

    # -- public accesses

    def read(self, addr, nbytes):
        self._check(addr, nbytes)
        return self._load_bytes(addr, nbytes)

    def fetch(self, addr, nbytes):
        """Instruction-fetch read: promotes default words to immutable and
        reports whether every touched word is (now) immutable."""
        self._check(addr, nbytes)
        value = self._load_bytes(addr, nbytes)
        if not self.tracking:
            return value, False
        all_immutable = True
        for word in self._words(addr, nbytes):
            arr, slot = self._status_slot(word)
            st = arr[slot]
            if st == STATUS_DEFAULT:
                arr[slot] = STATUS_IMMUTABLE
            elif st == STATUS_MUTABLE:
                all_immutable = False
        return value, all_immutable

    def write(self, addr, nbytes, value):
        self._check(addr, nbytes)
        if self.tracking:
            for word in self._words(addr, nbytes):
                arr, slot = self._status_slot(word)
                if arr[slot] == STATUS_IMMUTABLE:
                    ids = self.callbacks.pop(word, None)
                    if ids and self.invalidation_sink is not None:
                        self.invalidation_sink(word, ids)
                    arr[slot] = STATUS_MUTABLE
        self._store_bytes(addr, nbytes, value)

    def poke(self, addr, nbytes, value):
        """Raw byte store bypassing status tracking (image loading, undo)."""
        self._check(addr, nbytes)
        self._store_bytes(addr, nbytes, value)

    def status_of(self, word):
        arr = self.word_status.get((word << 3) & ~(PAGE_SIZE - 1))
        if arr is None:
            return STATUS_DEFAULT
        return arr[word & (PAGE_WORDS - 1)]

    def register_invalidation(self, word, callback_id):
        """Ask for callback_id to be delivered when `word` (an 8-byte word
        index) is first written while immutable.  Registering on an
        already-mutable word is permitted but the callback never fires."""
        ids = self.callbacks.setdefault(word, [])
        if callback_id not in ids:
            ids.append(callback_id)

    def load_image(self, data, addr):
        self._check(addr, max(len(data), 1))
        for i in range(0, len(data), PAGE_SIZE):
            chunk = data[i : i + PAGE_SIZE]
            a = addr + i
            base = a & ~(PAGE_SIZE - 1)
            off = a - base
            if off + len(chunk) <= PAGE_SIZE:
                self._page(base)[off : off + len(chunk)] = chunk
            else:
                for j, byte in enumerate(chunk):
                    b = a + j
                    self._page(b & ~(PAGE_SIZE - 1))[b & (PAGE_SIZE - 1)] = byte

    def content_snapshot(self):
        """Touched memory as {page base: bytes}, all-zero pages dropped."""
        return {
            base: bytes(page)
            for base, page in sorted(self.pages.items())
            if any(page)
        }
