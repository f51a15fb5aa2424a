# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled cache kernel; same surface and semantics as ``_core_py``."""

from cpython.mem cimport PyMem_Malloc, PyMem_Free
from libc.string cimport memset

cdef enum:
    ST_I = 0
    ST_E = 2
    ST_M = 3
    EV_STORE = 1
    EV_SCF = 2
    EV_FORCE = 3
    FL_NAIVE = 1
    FL_CLSF = 3


cdef class CacheCore:
    cdef public int num_sets, num_ways
    cdef public int clsf_flag
    cdef public unsigned long long clock
    cdef long long *owner_
    cdef long long *tag_
    cdef unsigned char *state_
    cdef unsigned char *fase_
    cdef unsigned long long *stamp_
    cdef Py_ssize_t n

    def __cinit__(self, int num_sets, int num_ways):
        cdef Py_ssize_t i
        self.num_sets = num_sets
        self.num_ways = num_ways
        self.n = <Py_ssize_t>num_sets * num_ways
        self.owner_ = <long long *>PyMem_Malloc(self.n * sizeof(long long))
        self.tag_ = <long long *>PyMem_Malloc(self.n * sizeof(long long))
        self.state_ = <unsigned char *>PyMem_Malloc(self.n)
        self.fase_ = <unsigned char *>PyMem_Malloc(self.n)
        self.stamp_ = <unsigned long long *>PyMem_Malloc(self.n * sizeof(unsigned long long))
        if not (self.owner_ and self.tag_ and self.state_ and self.fase_ and self.stamp_):
            raise MemoryError()
        for i in range(self.n):
            self.owner_[i] = -1
            self.tag_[i] = 0
            self.stamp_[i] = 0
        memset(self.state_, 0, self.n)
        memset(self.fase_, 0, self.n)
        self.clsf_flag = 0
        self.clock = 0

    def __dealloc__(self):
        PyMem_Free(self.owner_)
        PyMem_Free(self.tag_)
        PyMem_Free(self.state_)
        PyMem_Free(self.fase_)
        PyMem_Free(self.stamp_)

    def get_line(self, Py_ssize_t i):
        return self.owner_[i], self.tag_[i], self.state_[i], self.fase_[i], self.stamp_[i]

    def set_line(self, Py_ssize_t i, long long owner, long long tag, int state, int fase,
                 unsigned long long stamp):
        self.owner_[i] = owner
        self.tag_[i] = tag
        self.state_[i] = state
        self.fase_[i] = fase
        self.stamp_[i] = stamp

    def occupancy(self):
        cdef Py_ssize_t i
        cdef long long valid = 0, dirty = 0
        for i in range(self.n):
            if self.state_[i] != ST_I:
                valid += 1
                if self.state_[i] == ST_M:
                    dirty += 1
        return valid, dirty

    cdef inline int _victim(self, Py_ssize_t set_index) nogil:
        cdef Py_ssize_t base = set_index * self.num_ways
        cdef int w, best = 0
        for w in range(self.num_ways):
            if self.state_[base + w] == ST_I:
                return w
            if self.stamp_[base + w] < self.stamp_[base + best]:
                best = w
        return best

    def victim_way(self, Py_ssize_t set_index):
        return self._victim(set_index)

    def access(self, Py_ssize_t set_index, long long pid, long long tag, bint is_store, bint scf):
        cdef Py_ssize_t base = set_index * self.num_ways
        cdef Py_ssize_t i
        cdef int w
        cdef unsigned char ev_state
        for w in range(self.num_ways):
            i = base + w
            if self.state_[i] != ST_I and self.owner_[i] == pid and self.tag_[i] == tag:
                if is_store and self.state_[i] != ST_M:
                    self.state_[i] = ST_M
                    self.fase_[i] = 1
                    if scf:
                        self.clsf_flag = 1
                self.clock += 1
                self.stamp_[i] = self.clock
                return True, w, False, -1, 0, ST_I, 0
        w = self._victim(set_index)
        i = base + w
        ev_state = self.state_[i]
        if ev_state != ST_I:
            ev = (True, self.owner_[i], self.tag_[i], ev_state, self.fase_[i])
        else:
            ev = (False, -1, 0, ST_I, 0)
        self.owner_[i] = pid
        self.tag_[i] = tag
        self.state_[i] = ST_M if is_store else ST_E
        self.fase_[i] = 1
        if scf:
            self.clsf_flag = 1
        self.clock += 1
        self.stamp_[i] = self.clock
        return (False, w) + ev

    cdef inline void _force(self, Py_ssize_t set_index, Py_ssize_t way, long long pid, int new_state):
        cdef Py_ssize_t i = set_index * self.num_ways + way
        if new_state == ST_I:
            self.owner_[i] = -1
            self.tag_[i] = 0
            self.fase_[i] = 0
        elif self.state_[i] == ST_I:
            self.owner_[i] = pid
            self.tag_[i] = 0
        self.state_[i] = new_state

    def force(self, Py_ssize_t set_index, Py_ssize_t way, long long pid, int new_state):
        self._force(set_index, way, pid, new_state)

    def run(self, long long pid, const long long[:] kinds, const long long[:] a,
            const long long[:] b, const long long[:] c, Py_ssize_t start, Py_ssize_t stop,
            int scf, unsigned char[:] hits_out):
        cdef long long hits = 0, misses = 0, writebacks = 0
        cdef Py_ssize_t k, i, base, found
        cdef Py_ssize_t ways = self.num_ways
        cdef long long kind, t
        cdef bint store
        for k in range(start, stop):
            kind = kinds[k]
            if kind == EV_SCF:
                scf = <int>a[k]
                hits_out[k - start] = 0
                continue
            if kind == EV_FORCE:
                self._force(a[k], b[k], pid, <int>c[k])
                hits_out[k - start] = 0
                continue
            base = a[k] * ways
            t = b[k]
            store = kind == EV_STORE
            found = -1
            for i in range(base, base + ways):
                if self.state_[i] != ST_I and self.owner_[i] == pid and self.tag_[i] == t:
                    found = i
                    break
            self.clock += 1
            if found >= 0:
                hits += 1
                hits_out[k - start] = 1
                if store and self.state_[found] != ST_M:
                    self.state_[found] = ST_M
                    self.fase_[found] = 1
                    if scf:
                        self.clsf_flag = 1
                self.stamp_[found] = self.clock
                continue
            misses += 1
            hits_out[k - start] = 0
            i = base + self._victim(a[k])
            if self.state_[i] == ST_M:
                writebacks += 1
            self.owner_[i] = pid
            self.tag_[i] = t
            self.state_[i] = ST_M if store else ST_E
            self.fase_[i] = 1
            if scf:
                self.clsf_flag = 1
            self.stamp_[i] = self.clock
        return hits, misses, writebacks, scf

    def flush(self, int mode, bint collect):
        cdef Py_ssize_t i
        cdef long long flushed = 0, writebacks = 0
        cdef unsigned char st
        cdef bint do_flush
        cdef bint naive = mode == FL_NAIVE
        keys = [] if collect else None
        if mode == FL_CLSF and not self.clsf_flag:
            memset(self.fase_, 0, self.n)
            return 0, 0, 0, True, keys
        for i in range(self.n):
            st = self.state_[i]
            do_flush = st != ST_I and (naive or not self.fase_[i])
            self.fase_[i] = 0
            if do_flush:
                flushed += 1
                if st == ST_M:
                    writebacks += 1
                if collect:
                    keys.append((self.owner_[i], self.tag_[i], i // self.num_ways))
                self.state_[i] = ST_I
                self.owner_[i] = -1
                self.tag_[i] = 0
        self.clsf_flag = 0
        return self.n, flushed, writebacks, False, keys
