// Memory-hierarchy panel: the provenance DAG as a collapsible tree,
// color-coded by contributing agent. Node set mirrors the provenance
// export at the displayed cursor.

import { agentColor } from './colors.js';
import { SessionState } from './state.js';
import { ProvenanceNode } from './types.js';

export interface HierarchyRow {
    node: ProvenanceNode;
    depth: number;
    color: string;
    expandable: boolean;
    expanded: boolean;
}

export class HierarchyView {
    private readonly expanded = new Set<string>();

    constructor(private readonly state: SessionState) {}

    nodeCount(): number {
        return this.state.nodes.size;
    }

    roots(): ProvenanceNode[] {
        const parented = new Set<string>();
        for (const node of this.state.nodes.values()) {
            for (const child of node.children) parented.add(child);
        }
        return [...this.state.nodes.values()]
            .filter((node) => !parented.has(node.node_id))
            .sort((a, b) => a.timestamp - b.timestamp);
    }

    toggle(nodeId: string): void {
        if (this.expanded.has(nodeId)) this.expanded.delete(nodeId);
        else this.expanded.add(nodeId);
    }

    /** Visible rows in depth-first order, honoring collapse state. */
    rows(): HierarchyRow[] {
        const out: HierarchyRow[] = [];
        const visit = (node: ProvenanceNode, depth: number) => {
            const expandable = node.children.length > 0;
            const expanded = this.expanded.has(node.node_id);
            out.push({
                node,
                depth,
                color: node.agent_id === 'session' ? '#222222' : agentColor(node.agent_id),
                expandable,
                expanded,
            });
            if (expanded) {
                for (const childId of node.children) {
                    const child = this.state.nodes.get(childId);
                    if (child) visit(child, depth + 1);
                }
            }
        };
        for (const root of this.roots()) visit(root, 0);
        return out;
    }
}
