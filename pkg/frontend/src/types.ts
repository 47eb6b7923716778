// Wire types mirroring the service's JSON payloads.

export interface SessionEvent {
    seq: number;
    timestamp: number;
    agent_id: string | null;
    kind: string;
    payload: Record<string, any>;
}

export interface LayoutDot {
    id: string;
    radius: number;
    angle: number;
    x: number;
    y: number;
    cluster: number;
}

export interface ProvenanceNode {
    node_id: string;
    kind: 'Leaf' | 'Interim' | 'Final';
    agent_id: string;
    timestamp: number;
    children: string[];
    source_article: string | null;
    text: string;
}

export type Glyph = 'unread' | 'included' | 'excluded';

export interface ChatMessage {
    speaker: 'user' | 'agent';
    text: string;
}

export interface AgentConfigFields {
    research_question: string;
    detailed_focus: string;
    inclusion_exclusion_criteria: string;
    summarization_requirement: string;
}

export type InterventionBody =
    | { kind: 'path'; target_article: string }
    | { kind: 'chat'; text: string }
    | { kind: 'instruct'; updates: Partial<AgentConfigFields> };
