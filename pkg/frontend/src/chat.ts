// Per-agent chat: posts Chat interventions and renders the reflection
// replies that come back on the event stream. Messages derive from events
// only (no optimistic echo), so a refresh reproduces the thread exactly.

import { ApiClient } from './api.js';
import { SessionState } from './state.js';
import { ChatMessage } from './types.js';

export class ChatPanel {
    lastError: string | null = null;

    constructor(
        private readonly state: SessionState,
        private readonly api: ApiClient,
        private readonly sessionId: string,
    ) {}

    messages(agentId: string): ChatMessage[] {
        return this.state.conversations.get(agentId) ?? [];
    }

    pendingBadge(agentId: string): number {
        return this.state.pendingInterventions.get(agentId) ?? 0;
    }

    async send(agentId: string, text: string): Promise<boolean> {
        this.lastError = null;
        try {
            await this.api.postIntervention(this.sessionId, agentId, { kind: 'chat', text });
            return true;
        } catch (error) {
            this.lastError = String(error);
            return false;
        }
    }
}
