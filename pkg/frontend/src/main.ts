// Page wiring: filter panel on top, flow overview in the middle, session
// list at the bottom. Overview first, then filter, then unfold the details.

import { getActions, getSessionDetail, queryFlow, querySessions, QueryBody } from "./api.js";
import { buildFilterSpec, buildTimeRange, FormState, emptyFormState } from "./filter_form.js";
import { highlightSubgraph, nodeKey, edgeKey } from "./highlight.js";
import { buildViewModel, ribbonPath, OTHER_ACTION } from "./sankey_layout.js";
import { detailHtml, summaryRowHtml, UnfoldCache } from "./session_list.js";
import { RequestGate } from "./state.js";
import type { ActionCatalogEntry, FlowGraph, SessionsPage } from "./types.js";
import { label } from "./types.js";

const PAGE_SIZE = 25;
const SVG_NS = "http://www.w3.org/2000/svg";

const gate = new RequestGate();
const unfoldCache = new UnfoldCache(getSessionDetail);

let catalog: ActionCatalogEntry[] = [];
let currentFlow: FlowGraph | null = null;
let currentBody: QueryBody = {};
let currentOffset = 0;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  if (text !== undefined) node.textContent = text;
  return node;
}

function byId<T extends HTMLElement>(id: string): T {
  return document.getElementById(id) as T;
}

function readForm(): FormState {
  const state = emptyFormState();
  state.preset = (byId<HTMLSelectElement>("time-preset").value as FormState["preset"]) ?? "all";
  state.customStart = byId<HTMLInputElement>("time-start").value;
  state.customEnd = byId<HTMLInputElement>("time-end").value;
  state.containsText = byId<HTMLInputElement>("f-text").value;
  state.durationMinS = byId<HTMLInputElement>("f-dur-min").value;
  state.durationMaxS = byId<HTMLInputElement>("f-dur-max").value;
  state.loggedInOnly = byId<HTMLInputElement>("f-logged-in").checked;
  state.userId = byId<HTMLInputElement>("f-user").value;
  state.minActions = byId<HTMLInputElement>("f-min-actions").value;
  state.containsAction = byId<HTMLSelectElement>("f-action").value;
  state.dwellAction = byId<HTMLSelectElement>("f-dwell-action").value;
  state.dwellMinS = byId<HTMLInputElement>("f-dwell-min").value;
  return state;
}

function actionLabel(actionId: string): string {
  if (actionId === OTHER_ACTION) return "Other";
  const entry = catalog.find((e) => e.action_id === actionId);
  return entry ? label(entry.labels, actionId) : actionId;
}

// --- sankey rendering -------------------------------------------------------

function renderFlow(flow: FlowGraph): void {
  currentFlow = flow;
  const host = byId<HTMLDivElement>("sankey");
  host.textContent = "";
  byId<HTMLSpanElement>("flow-total").textContent =
    `${flow.session_total} sessions, first ${flow.max_steps} steps`;
  if (flow.session_total === 0) {
    host.append(el("p", { class: "empty" }, "No sessions match the current filters."));
    return;
  }
  const width = Math.max(640, host.clientWidth || 960);
  const height = 460;
  const vm = buildViewModel(flow, { width, height });
  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute("viewBox", `0 0 ${width} ${height}`);
  svg.setAttribute("width", "100%");

  for (const ribbon of vm.ribbons) {
    const path = document.createElementNS(SVG_NS, "path");
    path.setAttribute("d", ribbonPath(ribbon));
    path.setAttribute("class", "ribbon");
    path.dataset.key = edgeKey(ribbon.step, ribbon.from, ribbon.to);
    svg.append(path);
  }
  for (const box of vm.boxes) {
    const group = document.createElementNS(SVG_NS, "g");
    group.setAttribute("class", "box-group");
    group.dataset.key = nodeKey(box.step, box.actionId);
    group.dataset.action = box.actionId;
    const rect = document.createElementNS(SVG_NS, "rect");
    rect.setAttribute("x", String(box.x));
    rect.setAttribute("y", String(box.y));
    rect.setAttribute("width", String(box.width));
    rect.setAttribute("height", String(Math.max(1, box.height)));
    rect.setAttribute("class", "box");
    group.append(rect);
    if (box.dropoff > 0) {
      const stub = document.createElementNS(SVG_NS, "rect");
      const stubHeight = Math.max(1, box.dropoff * vm.pxPerSession);
      stub.setAttribute("x", String(box.x + box.width));
      stub.setAttribute("y", String(box.y + box.height - stubHeight));
      stub.setAttribute("width", "6");
      stub.setAttribute("height", String(stubHeight));
      stub.setAttribute("class", "dropoff");
      group.append(stub);
    }
    const text = document.createElementNS(SVG_NS, "text");
    text.setAttribute("x", String(box.x + box.width + 4));
    text.setAttribute("y", String(box.y + Math.max(10, box.height / 2 + 3)));
    text.setAttribute("class", "box-label");
    text.textContent = `${actionLabel(box.actionId)} (${box.count})`;
    group.append(text);
    group.addEventListener("mouseenter", () => applyHighlight(box.actionId));
    group.addEventListener("mouseleave", clearHighlight);
    svg.append(group);
  }
  host.append(svg);
}

export function applyHighlight(actionId: string): void {
  if (!currentFlow || actionId === OTHER_ACTION) return;
  const selection = highlightSubgraph(currentFlow, actionId);
  document.querySelectorAll<SVGElement>(".box-group").forEach((group) => {
    group.classList.toggle("dimmed", !selection.nodes.has(group.dataset.key ?? ""));
  });
  document.querySelectorAll<SVGElement>(".ribbon").forEach((path) => {
    path.classList.toggle("dimmed", !selection.edges.has(path.dataset.key ?? ""));
  });
}

export function clearHighlight(): void {
  document.querySelectorAll<SVGElement>(".dimmed").forEach((node) => {
    node.classList.remove("dimmed");
  });
}

// --- session list -----------------------------------------------------------

function renderSessions(page: SessionsPage): void {
  byId<HTMLSpanElement>("list-total").textContent = `${page.total} sessions`;
  const body = byId<HTMLTableSectionElement>("session-rows");
  body.innerHTML = page.sessions.map(summaryRowHtml).join("");
  body.querySelectorAll<HTMLTableRowElement>(".session-row").forEach((row) => {
    row.addEventListener("click", () => toggleUnfold(row));
  });
  const maxOffset = Math.max(0, page.total - 1);
  byId<HTMLButtonElement>("page-prev").disabled = currentOffset <= 0;
  byId<HTMLButtonElement>("page-next").disabled = currentOffset + PAGE_SIZE > maxOffset;
  byId<HTMLSpanElement>("page-info").textContent = page.total
    ? `${currentOffset + 1}–${Math.min(page.total, currentOffset + PAGE_SIZE)} of ${page.total}`
    : "0 of 0";
}

async function toggleUnfold(row: HTMLTableRowElement): Promise<void> {
  const existing = row.nextElementSibling;
  if (existing && existing.classList.contains("detail-row")) {
    existing.remove();
    row.querySelector(".unfold-cell")!.textContent = "▸";
    return;
  }
  const id = row.dataset.sessionId!;
  const detail = await unfoldCache.get(id);
  const detailRow = el("tr", { class: "detail-row" });
  const cell = el("td", { colspan: "6" });
  cell.innerHTML = detailHtml(detail);
  detailRow.append(cell);
  row.after(detailRow);
  row.querySelector(".unfold-cell")!.textContent = "▾";
}

// --- submit -----------------------------------------------------------------

async function submit(offset = 0): Promise<void> {
  currentOffset = offset;
  const state = readForm();
  currentBody = { filter: buildFilterSpec(state), time_range: buildTimeRange(state) };
  const id = gate.begin();
  const status = byId<HTMLSpanElement>("status");
  status.textContent = "loading…";
  try {
    const [flow, sessions] = await Promise.all([
      queryFlow({ ...currentBody, max_steps: 8 }),
      querySessions({ ...currentBody, page: { offset, limit: PAGE_SIZE } }),
    ]);
    if (!gate.isCurrent(id)) return; // superseded by a newer submit
    unfoldCache.clear();
    renderFlow(flow);
    renderSessions(sessions);
    status.textContent = "";
  } catch (err) {
    if (!gate.isCurrent(id)) return;
    status.textContent = `error: ${(err as Error).message}`;
  }
}

async function changePage(delta: number): Promise<void> {
  const offset = Math.max(0, currentOffset + delta * PAGE_SIZE);
  currentOffset = offset;
  const id = gate.begin();
  const page = await querySessions({ ...currentBody, page: { offset, limit: PAGE_SIZE } });
  if (!gate.isCurrent(id)) return;
  renderSessions(page);
}

function fillActionSelects(): void {
  for (const selectId of ["f-action", "f-dwell-action"]) {
    const select = byId<HTMLSelectElement>(selectId);
    select.append(el("option", { value: "" }, "(any action)"));
    for (const entry of catalog) {
      select.append(el("option", { value: entry.action_id }, label(entry.labels, entry.action_id)));
    }
  }
}

async function init(): Promise<void> {
  catalog = await getActions();
  fillActionSelects();
  byId<HTMLFormElement>("filter-form").addEventListener("submit", (event) => {
    event.preventDefault();
    void submit(0);
  });
  byId<HTMLSelectElement>("time-preset").addEventListener("change", () => {
    const custom = byId<HTMLSelectElement>("time-preset").value === "custom";
    byId<HTMLDivElement>("custom-range").style.display = custom ? "" : "none";
  });
  byId<HTMLButtonElement>("page-prev").addEventListener("click", () => void changePage(-1));
  byId<HTMLButtonElement>("page-next").addEventListener("click", () => void changePage(1));
  await submit(0);
}

if (typeof document !== "undefined" && document.getElementById("filter-form")) {
  void init();
}
