// Request sequencing: one in-flight query pair per submit; responses for
// superseded submits are dropped so the rendered diagram always corresponds
// to the most recent completed request for the current filters.

export class RequestGate {
  private latest = 0;

  begin(): number {
    return ++this.latest;
  }

  isCurrent(id: number): boolean {
    return id === this.latest;
  }
}
