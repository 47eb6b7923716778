// Agent-status editor: shows the live screening parameters and posts an
// Instruct intervention carrying only the fields the user changed.

import { ApiClient } from './api.js';
import { SessionState } from './state.js';
import { AgentConfigFields } from './types.js';

export class InstructEditor {
    lastError: string | null = null;

    constructor(
        private readonly state: SessionState,
        private readonly api: ApiClient,
        private readonly sessionId: string,
    ) {}

    fields(agentId: string): AgentConfigFields | null {
        const config = this.state.agentConfigs.get(agentId);
        return config ? { ...config } : null;
    }

    diff(agentId: string, edited: AgentConfigFields): Partial<AgentConfigFields> {
        const current = this.state.agentConfigs.get(agentId);
        const changes: Partial<AgentConfigFields> = {};
        if (!current) return changes;
        for (const key of Object.keys(edited) as Array<keyof AgentConfigFields>) {
            if (edited[key] !== current[key]) changes[key] = edited[key];
        }
        return changes;
    }

    async save(agentId: string, edited: AgentConfigFields): Promise<boolean> {
        this.lastError = null;
        const updates = this.diff(agentId, edited);
        if (Object.keys(updates).length === 0) return true;
        try {
            await this.api.postIntervention(this.sessionId, agentId, {
                kind: 'instruct',
                updates,
            });
            return true;
        } catch (error) {
            this.lastError = String(error);
            return false;
        }
    }
}
