"""Pure-Python cache kernel.

Mirrors ``_core.pyx`` line for line; used when the compiled extension is
missing or when ``FASE_SIM_BACKEND=python`` is set.  Lines live in flat
arrays indexed ``set * num_ways + way``.
"""

# coherence encodings (two bits, as stored in the tag array)
I, S, E, M = 0, 1, 2, 3

# event kinds in compiled traces
EV_LOAD, EV_STORE, EV_SCF, EV_FORCE = 0, 1, 2, 3

# flush modes understood by the kernel
FL_NAIVE, FL_LLSF, FL_CLSF = 1, 2, 3


class CacheCore:
    def __init__(self, num_sets, num_ways):
        n = num_sets * num_ways
        self.num_sets = num_sets
        self.num_ways = num_ways
        self.owner = [-1] * n
        self.tag = [0] * n
        self.state = [I] * n
        self.fase = [0] * n
        self.stamp = [0] * n
        self.clsf_flag = 0
        self.clock = 0

    def get_line(self, i):
        return self.owner[i], self.tag[i], self.state[i], self.fase[i], self.stamp[i]

    def set_line(self, i, owner, tag, state, fase, stamp):
        self.owner[i] = owner
        self.tag[i] = tag
        self.state[i] = state
        self.fase[i] = fase
        self.stamp[i] = stamp

    def occupancy(self):
        """``(valid, dirty)`` line counts."""
        valid = dirty = 0
        for st in self.state:
            if st != I:
                valid += 1
                if st == M:
                    dirty += 1
        return valid, dirty

    def victim_way(self, set_index):
        base = set_index * self.num_ways
        state = self.state
        stamp = self.stamp
        best = 0
        for w in range(self.num_ways):
            if state[base + w] == I:
                return w
            if stamp[base + w] < stamp[base + best]:
                best = w
        return best

    def access(self, set_index, pid, tag, is_store, scf):
        """Service one load/store.

        Returns ``(hit, way, ev_valid, ev_owner, ev_tag, ev_state, ev_fase)``.
        """
        ways = self.num_ways
        base = set_index * ways
        state = self.state
        for w in range(ways):
            i = base + w
            if state[i] != I and self.owner[i] == pid and self.tag[i] == tag:
                if is_store and state[i] != M:
                    state[i] = M
                    self.fase[i] = 1
                    if scf:
                        self.clsf_flag = 1
                self.clock += 1
                self.stamp[i] = self.clock
                return True, w, False, -1, 0, I, 0
        w = self.victim_way(set_index)
        i = base + w
        ev_state = state[i]
        if ev_state != I:
            ev = (True, self.owner[i], self.tag[i], ev_state, self.fase[i])
        else:
            ev = (False, -1, 0, I, 0)
        self.owner[i] = pid
        self.tag[i] = tag
        state[i] = M if is_store else E
        self.fase[i] = 1
        if scf:
            self.clsf_flag = 1
        self.clock += 1
        self.stamp[i] = self.clock
        return (False, w) + ev

    def force(self, set_index, way, pid, new_state):
        i = set_index * self.num_ways + way
        if new_state == I:
            self.owner[i] = -1
            self.tag[i] = 0
            self.fase[i] = 0
        elif self.state[i] == I:
            self.owner[i] = pid
            self.tag[i] = 0
        self.state[i] = new_state

    def run(self, pid, kinds, a, b, c, start, stop, scf, hits_out):
        """Execute compiled events ``start:stop`` for one process.

        Per-event hit flags go to ``hits_out[k - start]``.  Returns
        ``(hits, misses, writebacks, scf)`` with the live scf bit after the run.
        """
        hits = misses = writebacks = 0
        ways = self.num_ways
        owner = self.owner
        tagv = self.tag
        state = self.state
        fase = self.fase
        stamp = self.stamp
        for k in range(start, stop):
            kind = kinds[k]
            if kind == EV_SCF:
                scf = a[k]
                hits_out[k - start] = 0
                continue
            if kind == EV_FORCE:
                self.force(a[k], b[k], pid, c[k])
                hits_out[k - start] = 0
                continue
            base = a[k] * ways
            t = b[k]
            store = kind == EV_STORE
            found = -1
            for i in range(base, base + ways):
                if state[i] != I and owner[i] == pid and tagv[i] == t:
                    found = i
                    break
            if found >= 0:
                hits += 1
                hits_out[k - start] = 1
                if store and state[found] != M:
                    state[found] = M
                    fase[found] = 1
                    if scf:
                        self.clsf_flag = 1
                self.clock += 1
                stamp[found] = self.clock
                continue
            misses += 1
            hits_out[k - start] = 0
            i = base + self.victim_way(a[k])
            if state[i] == M:
                writebacks += 1
            owner[i] = pid
            tagv[i] = t
            state[i] = M if store else E
            fase[i] = 1
            if scf:
                self.clsf_flag = 1
            self.clock += 1
            stamp[i] = self.clock
        return hits, misses, writebacks, scf

    def flush(self, mode, collect):
        """One flush event.  Returns ``(traversed, flushed, writebacks, nullified, keys)``.

        ``keys`` lists ``(owner, tag, set)`` of every invalidated line when
        ``collect`` is true, else None.
        """
        n = self.num_sets * self.num_ways
        fase = self.fase
        keys = [] if collect else None
        if mode == FL_CLSF and not self.clsf_flag:
            for i in range(n):
                fase[i] = 0
            return 0, 0, 0, True, keys
        state = self.state
        flushed = writebacks = 0
        naive = mode == FL_NAIVE
        for i in range(n):
            st = state[i]
            do_flush = st != I and (naive or not fase[i])
            fase[i] = 0
            if do_flush:
                flushed += 1
                if st == M:
                    writebacks += 1
                if collect:
                    keys.append((self.owner[i], self.tag[i], i // self.num_ways))
                state[i] = I
                self.owner[i] = -1
                self.tag[i] = 0
        self.clsf_flag = 0
        return n, flushed, writebacks, False, keys
