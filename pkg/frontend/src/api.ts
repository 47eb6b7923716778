// HTTP client for the session service. The UI talks to these endpoints
// exclusively; it holds no state the event log cannot reconstruct.

import { InterventionBody, LayoutDot, ProvenanceNode, SessionEvent } from './types.js';

export class SseParser {
    private buffer = '';
    ended = false;

    /** Feed a raw chunk; returns the complete events it finished. */
    push(chunk: string): SessionEvent[] {
        this.buffer += chunk;
        const events: SessionEvent[] = [];
        let boundary: number;
        while ((boundary = this.buffer.indexOf('\n\n')) >= 0) {
            const block = this.buffer.slice(0, boundary);
            this.buffer = this.buffer.slice(boundary + 2);
            let data = '';
            let eventName = '';
            for (const line of block.split('\n')) {
                if (line.startsWith('data: ')) data += line.slice(6);
                else if (line.startsWith('event: ')) eventName = line.slice(7).trim();
            }
            if (eventName === 'end') {
                this.ended = true;
                continue;
            }
            if (data) {
                events.push(JSON.parse(data) as SessionEvent);
            }
        }
        return events;
    }
}

export class ApiClient {
    constructor(
        private readonly base: string,
        private readonly fetchFn: typeof fetch = fetch,
    ) {}

    private async request(path: string, init?: RequestInit, retryOnce = false): Promise<Response> {
        try {
            const response = await this.fetchFn(`${this.base}${path}`, init);
            if (!response.ok) throw new Error(`HTTP ${response.status} for ${path}`);
            return response;
        } catch (error) {
            if (retryOnce) return this.request(path, init, false);
            throw error;
        }
    }

    async createSession(config: Record<string, unknown>): Promise<string> {
        const response = await this.request('/sessions', {
            method: 'POST',
            headers: { 'Content-Type': 'application/json' },
            body: JSON.stringify(config),
        });
        return (await response.json()).session_id;
    }

    async uploadCorpus(sessionId: string, csv: string): Promise<number> {
        const response = await this.request(`/sessions/${sessionId}/corpus`, {
            method: 'POST',
            headers: { 'Content-Type': 'text/csv' },
            body: csv,
        });
        return (await response.json()).articles;
    }

    async buildMap(sessionId: string): Promise<{ k: number; articles: number }> {
        return (await this.request(`/sessions/${sessionId}/map`, { method: 'POST' })).json();
    }

    async start(sessionId: string, wait = false): Promise<void> {
        await this.request(`/sessions/${sessionId}/start${wait ? '?wait=true' : ''}`, {
            method: 'POST',
        });
    }

    async pause(sessionId: string): Promise<void> {
        await this.request(`/sessions/${sessionId}/pause`, { method: 'POST' });
    }

    async synthesize(sessionId: string): Promise<void> {
        await this.request(`/sessions/${sessionId}/synthesize`, { method: 'POST' });
    }

    /** Failed posts are retried once, then surfaced to the caller. */
    async postIntervention(
        sessionId: string,
        agentId: string,
        body: InterventionBody,
    ): Promise<string> {
        const response = await this.request(
            `/sessions/${sessionId}/agents/${agentId}/interventions`,
            {
                method: 'POST',
                headers: { 'Content-Type': 'application/json' },
                body: JSON.stringify(body),
            },
            true,
        );
        return (await response.json()).intervention_id;
    }

    async layout(sessionId: string): Promise<LayoutDot[]> {
        return (await this.request(`/sessions/${sessionId}/map`)).json();
    }

    async provenance(sessionId: string): Promise<ProvenanceNode[]> {
        return (await this.request(`/sessions/${sessionId}/provenance`)).json();
    }

    async report(sessionId: string): Promise<{ markdown: string; citation_map: unknown[] }> {
        return (await this.request(`/sessions/${sessionId}/report`)).json();
    }

    /** The table download returns this text verbatim (single source of truth). */
    async exportCsv(sessionId: string): Promise<string> {
        return (await this.request(`/sessions/${sessionId}/export.csv`)).text();
    }

    /**
     * Tail the event stream from `fromSeq`, invoking `onEvent` in order.
     * Resolves when the server signals the end of the session stream.
     */
    async streamEvents(
        sessionId: string,
        fromSeq: number,
        onEvent: (event: SessionEvent) => void,
        signal?: AbortSignal,
    ): Promise<void> {
        const response = await this.request(
            `/sessions/${sessionId}/events?from=${fromSeq}`,
            { signal },
        );
        const reader = response.body!.getReader();
        const decoder = new TextDecoder();
        const parser = new SseParser();
        for (;;) {
            const { value, done } = await reader.read();
            if (done) return;
            for (const event of parser.push(decoder.decode(value, { stream: true }))) {
                onEvent(event);
            }
            if (parser.ended) return;
        }
    }
}
