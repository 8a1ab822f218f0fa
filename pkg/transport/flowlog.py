class FlowLog:
    """Tab-separated per-flow event records: time_ns, flow, event, detail."""

    def __init__(self, stream=None, keep=False):
        self.stream = stream
        self.records = [] if keep else None

    @property
    def enabled(self):
        return self.stream is not None or self.records is not None

    def write(self, now, flow_id, event, detail=""):
        if self.records is not None:
            self.records.append((now, flow_id, event, str(detail)))
        if self.stream is not None:
            self.stream.write(f"{now}\t{flow_id}\t{event}\t{detail}\n")

    def events(self, flow_id=None, event=None):
        """Kept records filtered by flow and event name."""
        return [
            r
            for r in self.records or ()
            if (flow_id is None or r[1] == flow_id) and (event is None or r[2] == event)
        ]


NULL_LOG = FlowLog()
