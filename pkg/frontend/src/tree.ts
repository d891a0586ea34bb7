/** Behavior-tree view model derived from the service's canonical XML, plus a
 * deterministic nested-list rendering with per-node badges. */

export interface TreeNode {
  kind: string;
  name: string;
  attributes: Record<string, string>;
  children: TreeNode[];
  /** dotted child-index path, matching execution trace event paths */
  path: string;
}

const COMPOSITE_KINDS = new Set(["Sequence", "Fallback", "Retry"]);

export function parseTreeXml(xml: string): TreeNode {
  const doc = new DOMParser().parseFromString(xml, "application/xml");
  const error = doc.querySelector("parsererror");
  if (error) throw new Error(`invalid tree XML: ${error.textContent ?? ""}`);
  let rootEl: Element = doc.documentElement;
  if (rootEl.tagName === "Root") {
    const children = Array.from(rootEl.children);
    if (children.length !== 1) throw new Error("Root must wrap exactly one node");
    rootEl = children[0];
  }
  return fromElement(rootEl, "root");
}

function fromElement(el: Element, path: string): TreeNode {
  const attributes: Record<string, string> = {};
  for (const attr of Array.from(el.attributes)) attributes[attr.name] = attr.value;
  const name = attributes["name"] ?? (el.tagName === "Retry" ? "retry" : "");
  delete attributes["name"];
  const children = Array.from(el.children).map((child, i) =>
    fromElement(child, `${path}.${i}`),
  );
  return { kind: el.tagName, name, attributes, children, path };
}

/** (kind, name) pairs in preorder — the invariant surface checked in tests. */
export function nodeSet(root: TreeNode): Array<[string, string]> {
  const out: Array<[string, string]> = [[root.kind, root.name]];
  for (const child of root.children) out.push(...nodeSet(child));
  return out;
}

export interface RenderOptions {
  bindings?: Record<string, { kind: string; policy_id?: string }>;
}

export function renderTree(
  container: HTMLElement,
  root: TreeNode,
  options: RenderOptions = {},
): void {
  container.textContent = "";
  container.appendChild(renderNode(root, options));
}

function renderNode(node: TreeNode, options: RenderOptions): HTMLElement {
  const li = document.createElement("li");
  li.className = `bt-node bt-${node.kind.toLowerCase()}`;
  li.dataset.path = node.path;

  const row = document.createElement("div");
  row.className = "bt-row";

  const kindBadge = document.createElement("span");
  kindBadge.className = "badge badge-kind";
  kindBadge.textContent = node.kind;
  row.appendChild(kindBadge);

  const label = document.createElement("span");
  label.className = "bt-name";
  label.textContent = node.name;
  row.appendChild(label);

  if (node.attributes["num_attempts"]) {
    const attempts = document.createElement("span");
    attempts.className = "badge badge-attempts";
    attempts.textContent = `×${node.attributes["num_attempts"]}`;
    row.appendChild(attempts);
  }

  const binding = options.bindings?.[node.name];
  if (node.kind === "Action" && binding) {
    const badge = document.createElement("span");
    badge.className = "badge badge-binding";
    badge.textContent = binding.policy_id || binding.kind;
    row.appendChild(badge);
  }

  const status = document.createElement("span");
  status.className = "badge badge-status";
  status.textContent = "";
  row.appendChild(status);

  li.appendChild(row);
  if (node.children.length > 0 && COMPOSITE_KINDS.has(node.kind)) {
    const ul = document.createElement("ul");
    ul.className = "bt-children";
    for (const child of node.children) ul.appendChild(renderNode(child, options));
    li.appendChild(ul);
  }
  return li;
}

/** Update the status badge and highlight for the node at `path`. */
export function setNodeStatus(
  container: HTMLElement,
  path: string,
  text: string,
  active: boolean,
): void {
  for (const el of Array.from(container.querySelectorAll<HTMLElement>(".bt-node"))) {
    if (el.dataset.path === path) {
      const badge = el.querySelector<HTMLElement>(":scope > .bt-row > .badge-status");
      if (badge) badge.textContent = text;
      el.classList.toggle("active", active);
    } else if (active) {
      el.classList.remove("active");
    }
  }
}
