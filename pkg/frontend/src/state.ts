// Single client-side event cursor: every panel derives from this state so
// panels can never disagree about what has happened. Rebuilding the state
// from the layout export plus the event log reproduces it exactly, which is
// what makes the page refresh-safe.

import {
    AgentConfigFields,
    ChatMessage,
    Glyph,
    LayoutDot,
    ProvenanceNode,
    SessionEvent,
} from './types.js';

export interface TableRow {
    id: string;
    title: string;
    cluster: number;
    agent_id: string;
    read_state: 'Unread' | 'Read';
    decision: 'Undecided' | 'Included' | 'Excluded';
    reason_of_exclusion: string;
    summary_phrase: string;
}

export class SessionState {
    readonly dots = new Map<string, LayoutDot>();
    readonly glyphs = new Map<string, Glyph>();
    readonly titles = new Map<string, string>();
    readonly trails = new Map<string, string[]>();
    readonly pointers = new Map<string, string>();
    readonly agentClusters = new Map<string, number>();
    readonly agentStatus = new Map<string, string>();
    readonly agentConfigs = new Map<string, AgentConfigFields>();
    readonly conversations = new Map<string, ChatMessage[]>();
    readonly pendingInterventions = new Map<string, number>();
    readonly nodes = new Map<string, ProvenanceNode>();
    readonly reasons = new Map<string, string>();
    readonly phrases = new Map<string, string>();
    phase = 'Created';
    reportMarkdown: string | null = null;
    cursor = 0;

    constructor(layout: LayoutDot[], titles?: Map<string, string>) {
        for (const dot of layout) {
            this.dots.set(dot.id, dot);
            this.glyphs.set(dot.id, 'unread');
        }
        if (titles) {
            for (const [id, title] of titles) this.titles.set(id, title);
        }
    }

    agents(): string[] {
        return [...this.agentClusters.keys()].sort();
    }

    apply(event: SessionEvent): void {
        if (event.seq <= this.cursor) return; // duplicates from reconnects
        this.cursor = event.seq;
        const agentId = event.agent_id ?? '';
        const payload = event.payload;
        switch (event.kind) {
            case 'AgentSpawned':
                this.agentClusters.set(agentId, payload.cluster_id);
                this.agentStatus.set(agentId, 'Idle');
                this.agentConfigs.set(agentId, { ...payload.config });
                this.trails.set(agentId, []);
                this.pointers.set(agentId, payload.start_article);
                this.conversations.set(agentId, []);
                this.pendingInterventions.set(agentId, 0);
                break;
            case 'AgentMoved':
                this.pointers.set(agentId, payload.article_id);
                break;
            case 'ArticleRead': {
                const article = payload.article_id as string;
                this.glyphs.set(article, payload.related_to_query ? 'included' : 'excluded');
                this.reasons.set(article, payload.reason_of_exclusion ?? '');
                this.phrases.set(article, payload.summary_phrase ?? '');
                this.trails.get(agentId)?.push(article);
                this.pointers.set(agentId, article);
                if (payload.forced_by) this.bumpPending(agentId, -1);
                break;
            }
            case 'NodeMerged':
                this.nodes.set(payload.node.node_id, payload.node as ProvenanceNode);
                break;
            case 'ReflectionCompleted': {
                this.conversations.get(agentId)?.push({ speaker: 'agent', text: payload.reflection });
                const config = this.agentConfigs.get(agentId);
                if (config) Object.assign(config, payload.applied_updates ?? {});
                for (const _ of payload.intervention_ids ?? []) this.bumpPending(agentId, -1);
                for (const revision of payload.revisions ?? []) {
                    this.glyphs.set(revision.article_id, 'excluded');
                    this.reasons.set(revision.article_id, revision.reason);
                    this.nodes.delete(revision.leaf_id);
                    for (const collapsed of revision.collapsed ?? []) this.nodes.delete(collapsed);
                    if (revision.detached) {
                        for (const node of this.nodes.values()) {
                            const index = node.children.indexOf(revision.detached);
                            if (index >= 0) node.children.splice(index, 1);
                        }
                    }
                }
                break;
            }
            case 'InterventionAccepted':
                this.bumpPending(agentId, +1);
                if (payload.intervention_kind === 'chat') {
                    this.conversations.get(agentId)?.push({ speaker: 'user', text: payload.payload.text });
                }
                break;
            case 'InterventionExpired':
                this.bumpPending(agentId, -1);
                break;
            case 'StatusChanged':
                if (event.agent_id === null) this.phase = payload.phase;
                else this.agentStatus.set(agentId, payload.status);
                break;
            case 'ReportReady':
                this.reportMarkdown = payload.markdown;
                break;
            default:
                break; // CorpusIngested / MapBuilt carry no view state
        }
    }

    applyAll(events: SessionEvent[]): void {
        for (const event of events) this.apply(event);
    }

    private bumpPending(agentId: string, delta: number): void {
        const current = this.pendingInterventions.get(agentId) ?? 0;
        this.pendingInterventions.set(agentId, Math.max(0, current + delta));
    }

    /** Trail vertices are exactly the agent's ArticleRead positions, in seq order. */
    trailPositions(agentId: string): Array<[number, number]> {
        return (this.trails.get(agentId) ?? []).map((articleId) => {
            const dot = this.dots.get(articleId)!;
            return [dot.x, dot.y];
        });
    }

    pointerPosition(agentId: string): [number, number] | null {
        const article = this.pointers.get(agentId);
        const dot = article ? this.dots.get(article) : undefined;
        return dot ? [dot.x, dot.y] : null;
    }

    tableRows(): TableRow[] {
        const clusterOwner = new Map<number, string>();
        for (const [agentId, cluster] of this.agentClusters) clusterOwner.set(cluster, agentId);
        const readerOf = new Map<string, string>();
        for (const [agentId, trail] of this.trails) {
            for (const article of trail) readerOf.set(article, agentId);
        }
        const rows: TableRow[] = [];
        for (const dot of this.dots.values()) {
            const glyph = this.glyphs.get(dot.id) ?? 'unread';
            rows.push({
                id: dot.id,
                title: this.titles.get(dot.id) ?? '',
                cluster: dot.cluster,
                agent_id: readerOf.get(dot.id) ?? clusterOwner.get(dot.cluster) ?? '',
                read_state: glyph === 'unread' ? 'Unread' : 'Read',
                decision:
                    glyph === 'unread' ? 'Undecided' : glyph === 'included' ? 'Included' : 'Excluded',
                reason_of_exclusion: this.reasons.get(dot.id) ?? '',
                summary_phrase: this.phrases.get(dot.id) ?? '',
            });
        }
        return rows;
    }
}
